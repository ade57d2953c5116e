//! OpenAI-compatible HTTP provider.
//!
//! Endpoints used, relative to the configured base URL:
//! `POST /chat/completions`, `POST /embeddings`, `POST /files`,
//! `POST /fine_tuning/jobs`, `GET /fine_tuning/jobs/{id}`.

use std::path::Path;
use std::time::Duration;

use reqwest::blocking::{multipart, Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatReply, ChatRequest, FinetuneJob, Hyperparams, JobStatus, Provider, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        HttpProviderConfig {
            base_url: "https://api.openai.com/v1".into(),
            api_key: None,
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    client: Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Rejected(format!("http client: {e}")))?;
        Ok(HttpProvider { config, client })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn authed(&self, rb: RequestBuilder) -> RequestBuilder {
        match &self.config.api_key {
            Some(k) => rb.bearer_auth(k),
            None => rb,
        }
    }

    fn send(&self, rb: RequestBuilder) -> Result<Value, ProviderError> {
        let resp = self.authed(rb).send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                ProviderError::Transient(e.to_string())
            } else {
                ProviderError::Malformed(e.to_string())
            }
        })?;
        decode(resp)
    }
}

fn decode(resp: Response) -> Result<Value, ProviderError> {
    let status = resp.status();
    let body = resp
        .text()
        .map_err(|e| ProviderError::Transient(format!("reading body: {e}")))?;
    if !status.is_success() {
        let msg = format!("{status}: {}", truncate(&body, 300));
        return Err(match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => ProviderError::Auth(msg),
            StatusCode::TOO_MANY_REQUESTS => ProviderError::RateLimited(msg),
            StatusCode::REQUEST_TIMEOUT => ProviderError::Transient(msg),
            s if s.is_server_error() => ProviderError::Transient(msg),
            _ => ProviderError::Rejected(msg),
        });
    }
    serde_json::from_str(&body)
        .map_err(|e| ProviderError::Malformed(format!("{e}: {}", truncate(&body, 200))))
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn malformed(what: &str) -> ProviderError {
    ProviderError::Malformed(format!("missing {what}"))
}

fn parse_job(v: &Value, hp: Option<&Hyperparams>) -> Result<FinetuneJob, ProviderError> {
    let id = v["id"]
        .as_str()
        .ok_or_else(|| malformed("job id"))?
        .to_string();
    let base_model = v["model"]
        .as_str()
        .ok_or_else(|| malformed("job model"))?
        .to_string();
    let status = match v["status"]
        .as_str()
        .ok_or_else(|| malformed("job status"))?
    {
        "validating_files" | "queued" => JobStatus::Queued,
        "running" => JobStatus::Running,
        "succeeded" => JobStatus::Succeeded,
        "failed" | "cancelled" => JobStatus::Failed,
        other => {
            return Err(ProviderError::Malformed(format!(
                "unknown job status `{other}`"
            )))
        }
    };
    let result_model = v["fine_tuned_model"].as_str().map(str::to_string);
    if status == JobStatus::Succeeded && result_model.is_none() {
        return Err(malformed("fine_tuned_model on succeeded job"));
    }
    let hyperparams = match hp {
        Some(h) => *h,
        None => {
            let h = &v["hyperparameters"];
            Hyperparams {
                epochs: h["n_epochs"].as_u64().unwrap_or(0) as u32,
                batch_size: h["batch_size"].as_u64().unwrap_or(0) as u32,
                lr_multiplier: h["learning_rate_multiplier"].as_f64().unwrap_or(0.0),
            }
        }
    };
    Ok(FinetuneJob {
        id,
        base_model,
        hyperparams,
        status,
        result_model: if status == JobStatus::Succeeded {
            result_model
        } else {
            None
        },
    })
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn chat(&self, req: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        let v = self.send(self.client.post(self.url("chat/completions")).json(&body))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| malformed("choices[0].message.content"))?
            .to_string();
        Ok(ChatReply {
            content,
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64(),
            completion_tokens: v["usage"]["completion_tokens"].as_u64(),
        })
    }

    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({ "model": model, "input": texts });
        let v = self.send(self.client.post(self.url("embeddings")).json(&body))?;
        let data = v["data"].as_array().ok_or_else(|| malformed("data"))?;
        let mut out: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (i, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().map(|x| x as usize).unwrap_or(i);
            let values = item["embedding"]
                .as_array()
                .ok_or_else(|| malformed("data[].embedding"))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| malformed("numeric embedding value"))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            out.push((index, values));
        }
        out.sort_by_key(|(i, _)| *i);
        Ok(out.into_iter().map(|(_, v)| v).collect())
    }

    fn create_finetune_job(
        &self,
        training_file: &Path,
        base_model: &str,
        hp: &Hyperparams,
    ) -> Result<FinetuneJob, ProviderError> {
        hp.validate().map_err(ProviderError::Rejected)?;
        let form = multipart::Form::new()
            .text("purpose", "fine-tune")
            .file("file", training_file)
            .map_err(|e| ProviderError::Rejected(format!("{}: {e}", training_file.display())))?;
        let uploaded = self.send(self.client.post(self.url("files")).multipart(form))?;
        let file_id = uploaded["id"]
            .as_str()
            .ok_or_else(|| malformed("file id"))?;
        let body = json!({
            "training_file": file_id,
            "model": base_model,
            "hyperparameters": {
                "n_epochs": hp.epochs,
                "batch_size": hp.batch_size,
                "learning_rate_multiplier": hp.lr_multiplier,
            }
        });
        let v = self.send(self.client.post(self.url("fine_tuning/jobs")).json(&body))?;
        parse_job(&v, Some(hp))
    }

    fn poll_job(&self, id: &str) -> Result<FinetuneJob, ProviderError> {
        let v = self.send(self.client.get(self.url(&format!("fine_tuning/jobs/{id}"))))?;
        parse_job(&v, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_status_mapping() {
        let v = json!({"id":"j","model":"m","status":"validating_files","fine_tuned_model":null,
            "hyperparameters":{"n_epochs":3,"batch_size":1,"learning_rate_multiplier":2.0}});
        let job = parse_job(&v, None).unwrap();
        assert_eq!(job.status, JobStatus::Queued);
        assert_eq!(job.hyperparams, Hyperparams::TERMS);
        let v = json!({"id":"j","model":"m","status":"succeeded","fine_tuned_model":"ft:m:x"});
        assert_eq!(
            parse_job(&v, Some(&Hyperparams::TERMS))
                .unwrap()
                .result_model
                .as_deref(),
            Some("ft:m:x")
        );
        let v = json!({"id":"j","model":"m","status":"succeeded"});
        assert!(parse_job(&v, None).is_err());
    }
}
