//! Pipeline configuration file (TOML). Unknown keys are rejected.
//!
//! ```toml
//! [provider]
//! kind = "mock"                  # or "http"
//! mock_script = "fixtures/mock.json"
//!
//! [extract]
//! k = 16
//! max_drift = 0.25
//!
//! [markers.close]
//! casting-defect = "%%"
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distill::DistillConfig;
use crate::evaluate::MatchConfig;
use crate::extract::{RunParams, Strategy, DEFAULT_K, DEFAULT_MAX_DRIFT};
use crate::llm::{
    EmbeddingCache, Gateway, GatewayError, HttpProvider, HttpProviderConfig, Hyperparams,
    MockProvider, MockScript, RetryPolicy, DEFAULT_BASE_MODEL,
};
use crate::markup::MarkerMap;

pub const API_KEY_ENV: &str = "ONTOFORGE_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    pub base_url: String,
    /// Environment variable holding the credential.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub mock_script: Option<PathBuf>,
    /// Persisted fine-tune job table for the mock provider.
    pub mock_state: Option<PathBuf>,
    pub embedding_model: String,
    pub embedding_cache: Option<PathBuf>,
    pub audit_log: Option<PathBuf>,
    pub concurrency: usize,
    pub retry: RetryPolicy,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            kind: ProviderKind::Mock,
            base_url: HttpProviderConfig::default().base_url,
            api_key_env: API_KEY_ENV.into(),
            timeout_secs: 120,
            mock_script: None,
            mock_state: None,
            embedding_model: "text-embedding-3-small".into(),
            embedding_cache: None,
            audit_log: None,
            concurrency: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl ProviderSettings {
    pub fn build_gateway(&self) -> Result<Gateway, ConfigError> {
        let gw = match self.kind {
            ProviderKind::Mock => {
                let script = match &self.mock_script {
                    Some(p) => MockScript::load(p).map_err(ConfigError::Invalid)?,
                    None => MockScript::default(),
                };
                let mut provider = MockProvider::new(script);
                if let Some(state) = &self.mock_state {
                    provider = provider.with_state_file(state);
                }
                Gateway::new(provider)
            }
            ProviderKind::Http => {
                let api_key = std::env::var(&self.api_key_env)
                    .ok()
                    .filter(|k| !k.is_empty());
                if api_key.is_none() {
                    log::warn!(
                        "{} is not set; requests are sent without a credential",
                        self.api_key_env
                    );
                }
                let provider = HttpProvider::new(HttpProviderConfig {
                    base_url: self.base_url.clone(),
                    api_key,
                    timeout: Duration::from_secs(self.timeout_secs),
                })
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Gateway::new(provider)
            }
        };
        let mut gw = gw
            .with_retry(self.retry)
            .with_concurrency(self.concurrency)
            .with_embedding_model(self.embedding_model.clone());
        if let Some(p) = &self.embedding_cache {
            gw = gw.with_cache(EmbeddingCache::open(p)?);
        }
        if let Some(p) = &self.audit_log {
            gw = gw.with_audit_file(p)?;
        }
        Ok(gw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractSettings {
    pub base_model: String,
    pub k: usize,
    pub max_drift: f64,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub profile: String,
    pub concurrency: usize,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        ExtractSettings {
            base_model: DEFAULT_BASE_MODEL.into(),
            k: DEFAULT_K,
            max_drift: DEFAULT_MAX_DRIFT,
            temperature: 0.0,
            max_output_tokens: 4096,
            profile: "cot".into(),
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneSettings {
    pub base_model: String,
    pub terms: Hyperparams,
    pub relations: Hyperparams,
}

impl Default for FinetuneSettings {
    fn default() -> Self {
        FinetuneSettings {
            base_model: DEFAULT_BASE_MODEL.into(),
            terms: Hyperparams::TERMS,
            relations: Hyperparams::RELATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReviewSettings {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Built review UI bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
    pub page_size: usize,
}

impl Default for ReviewSettings {
    fn default() -> Self {
        ReviewSettings {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("review-data"),
            ui_dir: None,
            page_size: crate::review::DEFAULT_PAGE_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub provider: ProviderSettings,
    pub markers: MarkerMap,
    pub extract: ExtractSettings,
    pub finetune: FinetuneSettings,
    pub distill: DistillConfig,
    pub evaluate: MatchConfig,
    pub review: ReviewSettings,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.extract.k == 0 {
            return bad("extract.k must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.extract.max_drift) {
            return bad(format!(
                "extract.max_drift {} outside [0, 1]",
                self.extract.max_drift
            ));
        }
        if self.provider.retry.max_attempts == 0 {
            return bad("provider.retry.max_attempts must be at least 1".into());
        }
        self.finetune
            .terms
            .validate()
            .map_err(ConfigError::Invalid)?;
        self.finetune
            .relations
            .validate()
            .map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Run parameters for a strategy. `model` overrides the configured base
    /// model and is required for fine-tuned runs.
    pub fn run_params(
        &self,
        strategy: Strategy,
        model: Option<&str>,
    ) -> Result<RunParams, ConfigError> {
        let model = match (strategy, model) {
            (_, Some(m)) => m.to_string(),
            (Strategy::FineTuned, None) => {
                return Err(ConfigError::Invalid(
                    "fine-tuned runs need the tuned model id".into(),
                ))
            }
            (_, None) => self.extract.base_model.clone(),
        };
        Ok(RunParams {
            model,
            k: (strategy == Strategy::Icl).then_some(self.extract.k),
            marker_map: self.markers.clone(),
            max_drift: self.extract.max_drift,
            temperature: self.extract.temperature,
            max_output_tokens: self.extract.max_output_tokens,
            profile: (strategy == Strategy::ZeroShot).then(|| self.extract.profile.clone()),
            concurrency: self.extract.concurrency,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TopConcept;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml(), "mem").unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.extract.k, 16);
        assert_eq!(cfg.finetune.terms, Hyperparams::TERMS);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("[extract]\nkk = 3\n", "mem").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1\n", "mem").is_err());
    }

    #[test]
    fn partial_marker_override() {
        let cfg =
            PipelineConfig::from_toml("[markers.close]\ncasting-defect = \"~~\"\n", "mem").unwrap();
        assert_eq!(cfg.markers.close(TopConcept::CastingDefect), "~~");
        assert_eq!(cfg.markers.close(TopConcept::CastingProcess), "##");
    }

    #[test]
    fn run_params_per_strategy() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.run_params(Strategy::Icl, None).unwrap().k, Some(16));
        assert_eq!(cfg.run_params(Strategy::ZeroShot, None).unwrap().k, None);
        assert!(cfg.run_params(Strategy::FineTuned, None).is_err());
    }
}
