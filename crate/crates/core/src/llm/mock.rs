//! Script-driven provider for offline, deterministic runs.
//!
//! A script is a JSON document:
//!
//! ```json
//! {
//!   "rules": [
//!     {"system_contains": "term extraction", "user_contains": "Input: Sand casting", "reply": "..."},
//!     {"user_contains": "flaky", "replies": [{"error": "transient"}, "ok"]}
//!   ],
//!   "embeddings": {"some text": [0.1, 0.9]},
//!   "embedding_dim": 32,
//!   "finetune_polls": 3
//! }
//! ```
//!
//! The first rule whose conditions all hold answers the request. A rule with
//! `replies` walks through them in order and repeats the last one. Texts
//! without an explicit embedding get a vector derived from their SHA-256.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    validate_training_file, ChatReply, ChatRequest, FinetuneJob, Hyperparams, JobStatus, Provider,
    ProviderError,
};
use crate::text::short_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockErrorKind {
    Transient,
    RateLimit,
    Auth,
    Rejected,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Error {
        error: MockErrorKind,
        #[serde(default)]
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<MockReply>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replies: Vec<MockReply>,
}

impl MockRule {
    pub fn text(user_contains: impl Into<String>, reply: impl Into<String>) -> Self {
        MockRule {
            user_contains: Some(user_contains.into()),
            reply: Some(MockReply::Text(reply.into())),
            ..Default::default()
        }
    }

    pub fn with_system(mut self, system_contains: impl Into<String>) -> Self {
        self.system_contains = Some(system_contains.into());
        self
    }

    fn matches(&self, req: &ChatRequest) -> bool {
        let sys_ok = self
            .system_contains
            .as_ref()
            .is_none_or(|s| req.system_content().is_some_and(|c| c.contains(s.as_str())));
        let user_ok = self.user_contains.as_ref().is_none_or(|s| {
            req.last_user_content()
                .is_some_and(|c| c.contains(s.as_str()))
        });
        let model_ok = self.model.as_ref().is_none_or(|m| *m == req.model);
        sys_ok && user_ok && model_ok
    }

    fn reply_at(&self, n: usize) -> Option<&MockReply> {
        if self.replies.is_empty() {
            self.reply.as_ref()
        } else {
            self.replies.get(n.min(self.replies.len() - 1))
        }
    }
}

fn default_dim() -> usize {
    32
}

fn default_polls() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_polls")]
    pub finetune_polls: u32,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript {
            rules: Vec::new(),
            embeddings: BTreeMap::new(),
            embedding_dim: default_dim(),
            finetune_polls: default_polls(),
        }
    }
}

impl MockScript {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MockJob {
    job: FinetuneJob,
    polls: u32,
}

pub struct MockProvider {
    script: MockScript,
    calls: Mutex<Vec<usize>>,
    jobs: Mutex<BTreeMap<String, MockJob>>,
    state_file: Option<PathBuf>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        let n = script.rules.len();
        MockProvider {
            script,
            calls: Mutex::new(vec![0; n]),
            jobs: Mutex::new(BTreeMap::new()),
            state_file: None,
        }
    }

    /// Keep fine-tune job state in a file so separate processes share it.
    pub fn with_state_file(mut self, path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        if let Ok(text) = fs::read_to_string(&path) {
            match serde_json::from_str(&text) {
                Ok(jobs) => self.jobs = Mutex::new(jobs),
                Err(e) => log::warn!("ignoring mock job state {}: {e}", path.display()),
            }
        }
        self.state_file = Some(path);
        self
    }

    fn save_jobs(&self, jobs: &BTreeMap<String, MockJob>) -> Result<(), ProviderError> {
        if let Some(path) = &self.state_file {
            let text = serde_json::to_string_pretty(jobs).expect("jobs serialize");
            fs::write(path, text).map_err(|e| ProviderError::Transient(e.to_string()))?;
        }
        Ok(())
    }

    fn hashed_vector(&self, text: &str) -> Vec<f64> {
        let dim = self.script.embedding_dim.max(1);
        let mut out = Vec::with_capacity(dim);
        let mut block = 0u32;
        while out.len() < dim {
            let mut h = Sha256::new();
            h.update(block.to_le_bytes());
            h.update(text.as_bytes());
            for chunk in h.finalize().chunks(4) {
                if out.len() == dim {
                    break;
                }
                let n = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                out.push(n as f64 / u32::MAX as f64 * 2.0 - 1.0);
            }
            block += 1;
        }
        out
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn chat(&self, req: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let idx = self
            .script
            .rules
            .iter()
            .position(|r| r.matches(req))
            .ok_or_else(|| {
                ProviderError::Rejected("no scripted reply matches the request".into())
            })?;
        let n = {
            let mut calls = self.calls.lock().unwrap();
            let n = calls[idx];
            calls[idx] += 1;
            n
        };
        match self.script.rules[idx].reply_at(n) {
            Some(MockReply::Text(t)) => Ok(ChatReply::text(t.clone())),
            Some(MockReply::Error { error, message }) => {
                let msg = if message.is_empty() {
                    "scripted failure".to_string()
                } else {
                    message.clone()
                };
                Err(match error {
                    MockErrorKind::Transient => ProviderError::Transient(msg),
                    MockErrorKind::RateLimit => ProviderError::RateLimited(msg),
                    MockErrorKind::Auth => ProviderError::Auth(msg),
                    MockErrorKind::Rejected => ProviderError::Rejected(msg),
                    MockErrorKind::Malformed => ProviderError::Malformed(msg),
                })
            }
            None => Err(ProviderError::Malformed(
                "scripted rule has no reply".into(),
            )),
        }
    }

    fn embed(&self, _model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts
            .iter()
            .map(|t| {
                self.script
                    .embeddings
                    .get(t)
                    .cloned()
                    .unwrap_or_else(|| self.hashed_vector(t))
            })
            .collect())
    }

    fn create_finetune_job(
        &self,
        training_file: &Path,
        base_model: &str,
        hp: &Hyperparams,
    ) -> Result<FinetuneJob, ProviderError> {
        hp.validate().map_err(ProviderError::Rejected)?;
        validate_training_file(training_file).map_err(ProviderError::Rejected)?;
        let content =
            fs::read(training_file).map_err(|e| ProviderError::Rejected(e.to_string()))?;
        let mut seed = content;
        seed.extend_from_slice(format!("|{base_model}|{hp:?}").as_bytes());
        let job = FinetuneJob {
            id: format!("ftjob-mock-{}", short_hash(&seed)),
            base_model: base_model.to_string(),
            hyperparams: *hp,
            status: JobStatus::Queued,
            result_model: None,
        };
        let mut jobs = self.jobs.lock().unwrap();
        jobs.insert(
            job.id.clone(),
            MockJob {
                job: job.clone(),
                polls: 0,
            },
        );
        self.save_jobs(&jobs)?;
        Ok(job)
    }

    fn poll_job(&self, id: &str) -> Result<FinetuneJob, ProviderError> {
        let mut jobs = self.jobs.lock().unwrap();
        let entry = jobs
            .get_mut(id)
            .ok_or_else(|| ProviderError::Rejected(format!("unknown job `{id}`")))?;
        entry.polls += 1;
        if entry.polls >= self.script.finetune_polls {
            entry.job.status = JobStatus::Succeeded;
            entry.job.result_model = Some(format!("{}:ft-mock", entry.job.base_model));
        } else {
            entry.job.status = JobStatus::Running;
        }
        let job = entry.job.clone();
        self.save_jobs(&jobs)?;
        Ok(job)
    }
}
