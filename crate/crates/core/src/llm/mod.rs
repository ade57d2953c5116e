//! Uniform access to chat completion, embeddings and fine-tune jobs.
//!
//! [`Gateway`] wraps a [`Provider`] with retries, a bounded in-flight pool,
//! an embedding cache and an audit log. Two providers ship: [`HttpProvider`]
//! speaks the OpenAI-compatible wire protocol, [`MockProvider`] replays a
//! script so whole pipelines run offline and deterministically.

mod cache;
mod http;
mod mock;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::short_hash;

pub use cache::EmbeddingCache;
pub use http::{HttpProvider, HttpProviderConfig};
pub use mock::{MockErrorKind, MockProvider, MockReply, MockRule, MockScript};

/// Base model used for the published fine-tuning runs.
pub const DEFAULT_BASE_MODEL: &str = "gpt-4.1-mini-2025-04-14";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            messages,
            model: model.into(),
            temperature: 0.0,
            max_output_tokens: 4096,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err("request has no user message".into());
        }
        if self.messages.iter().skip(1).any(|m| m.role == Role::System) {
            return Err("system message must come first".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("invalid temperature {}", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".into());
        }
        if self.model.is_empty() {
            return Err("model is empty".into());
        }
        Ok(())
    }

    /// Stable digest of the full request, used in audit references.
    pub fn fingerprint(&self) -> String {
        short_hash(
            serde_json::to_string(self)
                .expect("request serializes")
                .as_bytes(),
        )
    }

    pub fn system_content(&self) -> Option<&str> {
        self.messages
            .first()
            .filter(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
    }

    pub fn last_user_content(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub content: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl ChatReply {
    pub fn text(content: impl Into<String>) -> Self {
        ChatReply {
            content: content.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model: String,
}

impl EmbeddingVector {
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        cosine(&self.values, &other.values)
    }
}

/// Cosine similarity; zero when either vector has zero norm. Never returns
/// `-0.0`, so ranking with `total_cmp` treats orthogonal vectors as ties.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 || dot == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub epochs: u32,
    pub batch_size: u32,
    pub lr_multiplier: f64,
}

impl Hyperparams {
    /// Published setting for the term extraction model.
    pub const TERMS: Hyperparams = Hyperparams {
        epochs: 3,
        batch_size: 1,
        lr_multiplier: 2.0,
    };
    /// Published setting for the synonym and relation model.
    pub const RELATIONS: Hyperparams = Hyperparams {
        epochs: 3,
        batch_size: 1,
        lr_multiplier: 1.0,
    };

    pub fn validate(&self) -> Result<(), String> {
        if self.epochs == 0 {
            return Err("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if !(self.lr_multiplier.is_finite() && self.lr_multiplier > 0.0) {
            return Err(format!("invalid lr_multiplier {}", self.lr_multiplier));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneJob {
    pub id: String,
    pub base_model: String,
    pub hyperparams: Hyperparams,
    pub status: JobStatus,
    pub result_model: Option<String>,
}

impl FinetuneJob {
    pub fn is_consistent(&self) -> bool {
        self.result_model.is_some() == (self.status == JobStatus::Succeeded)
    }
}

/// One line of a fine-tuning file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub messages: Vec<ChatMessage>,
}

impl FinetuneRecord {
    /// A record needs a user turn followed by an assistant turn; a system
    /// turn is allowed only first.
    pub fn validate(&self) -> Result<(), String> {
        let roles: Vec<Role> = self.messages.iter().map(|m| m.role).collect();
        let body = match roles.first() {
            Some(Role::System) => &roles[1..],
            _ => &roles[..],
        };
        if body.len() < 2 || body.len() % 2 != 0 {
            return Err("expected alternating user/assistant messages".into());
        }
        for (i, r) in body.iter().enumerate() {
            let want = if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            };
            if *r != want {
                return Err(format!("message {} should be {:?}", i, want));
            }
        }
        Ok(())
    }
}

/// Check that every line of a fine-tuning file is a valid record.
pub fn validate_training_file(path: &Path) -> Result<usize, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut n = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: FinetuneRecord =
            serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        rec.validate().map_err(|e| format!("line {}: {e}", i + 1))?;
        n += 1;
    }
    if n == 0 {
        return Err("training file has no records".into());
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rejected by provider: {0}")]
    Rejected(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            ProviderError::Transient(_) | ProviderError::RateLimited(_)
        )
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error(transparent)]
    Provider(ProviderError),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: ProviderError },
    #[error("embedding dimension {got} does not match {expected} for model `{model}`")]
    DimensionMismatch {
        model: String,
        expected: usize,
        got: usize,
    },
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

/// Backend the gateway talks to.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn chat(&self, req: &ChatRequest) -> Result<ChatReply, ProviderError>;
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
    fn create_finetune_job(
        &self,
        training_file: &Path,
        base_model: &str,
        hp: &Hyperparams,
    ) -> Result<FinetuneJob, ProviderError>;
    fn poll_job(&self, id: &str) -> Result<FinetuneJob, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and mocks.
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            factor: 1.0,
        }
    }

    /// Delay before attempt `n + 1`, after `n` failures.
    pub fn delay_after(&self, failures: u32) -> Duration {
        let scale = self.factor.powi(failures.saturating_sub(1) as i32);
        self.base_delay.mul_f64(scale)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: chrono::DateTime<chrono::Utc>,
    pub op: String,
    pub request_hash: String,
    pub attempt: u32,
    pub latency_ms: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

#[derive(Default)]
struct AuditLog {
    entries: Mutex<Vec<AuditEntry>>,
    file: Option<Mutex<std::fs::File>>,
}

impl AuditLog {
    fn record(&self, entry: AuditEntry) {
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&entry).expect("audit entry serializes");
            let mut f = file.lock().unwrap();
            if let Err(e) = writeln!(f, "{line}") {
                log::warn!("audit log write failed: {e}");
            }
        }
        self.entries.lock().unwrap().push(entry);
    }
}

/// Counting semaphore bounding in-flight provider calls.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Shared entry point for every model call. Safe to share across threads.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    retry: RetryPolicy,
    cache: EmbeddingCache,
    audit: AuditLog,
    limiter: Limiter,
    embedding_model: String,
}

impl Gateway {
    pub fn new(provider: impl Provider + 'static) -> Self {
        Gateway::from_arc(Arc::new(provider))
    }

    pub fn from_arc(provider: Arc<dyn Provider>) -> Self {
        Gateway {
            provider,
            retry: RetryPolicy::default(),
            cache: EmbeddingCache::in_memory(),
            audit: AuditLog::default(),
            limiter: Limiter::new(4),
            embedding_model: "text-embedding-3-small".into(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: EmbeddingCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.limiter = Limiter::new(n);
        self
    }

    pub fn with_embedding_model(mut self, model: impl Into<String>) -> Self {
        self.embedding_model = model.into();
        self
    }

    /// Append every provider call to a line-delimited audit file.
    pub fn with_audit_file(mut self, path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        self.audit.file = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn embedding_model(&self) -> &str {
        &self.embedding_model
    }

    pub fn audit_entries(&self) -> Vec<AuditEntry> {
        self.audit.entries.lock().unwrap().clone()
    }

    fn call<T>(
        &self,
        op: &str,
        request_hash: &str,
        mut f: impl FnMut() -> Result<T, ProviderError>,
        tokens: impl Fn(&T) -> (Option<u64>, Option<u64>),
    ) -> Result<T, GatewayError> {
        let max = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = Instant::now();
            let result = {
                let _permit = self.limiter.acquire();
                f()
            };
            let latency_ms = started.elapsed().as_millis() as u64;
            let (prompt_tokens, completion_tokens) =
                result.as_ref().map(&tokens).unwrap_or((None, None));
            self.audit.record(AuditEntry {
                at: chrono::Utc::now(),
                op: op.to_string(),
                request_hash: request_hash.to_string(),
                attempt,
                latency_ms,
                ok: result.is_ok(),
                error: result.as_ref().err().map(ToString::to_string),
                prompt_tokens,
                completion_tokens,
            });
            match result {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < max => {
                    log::debug!("{op} attempt {attempt} failed: {e}; retrying");
                    std::thread::sleep(self.retry.delay_after(attempt));
                }
                Err(e) if e.is_retryable() => {
                    return Err(GatewayError::Exhausted {
                        attempts: attempt,
                        last: e,
                    })
                }
                Err(e) => return Err(GatewayError::Provider(e)),
            }
        }
    }

    /// Send a chat request and return the assistant content.
    pub fn chat(&self, r: &ChatRequest) -> Result<String, GatewayError> {
        r.validate().map_err(GatewayError::Precondition)?;
        let hash = r.fingerprint();
        let reply = self.call(
            "chat",
            &hash,
            || self.provider.chat(r),
            |rep| (rep.prompt_tokens, rep.completion_tokens),
        )?;
        Ok(reply.content)
    }

    /// Embed texts with the configured embedding model, through the cache.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::Precondition("nothing to embed".into()));
        }
        let model = self.embedding_model.clone();
        let mut missing: Vec<String> = Vec::new();
        for t in texts {
            if self.cache.get(&model, t).is_none() && !missing.contains(t) {
                missing.push(t.clone());
            }
        }
        for batch in missing.chunks(64) {
            let hash = short_hash(serde_json::to_string(&(&model, batch)).unwrap().as_bytes());
            let vectors = self.call(
                "embed",
                &hash,
                || self.provider.embed(&model, batch),
                |_| (None, None),
            )?;
            if vectors.len() != batch.len() {
                return Err(GatewayError::Provider(ProviderError::Malformed(format!(
                    "expected {} embeddings, got {}",
                    batch.len(),
                    vectors.len()
                ))));
            }
            for v in &vectors {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    return Err(GatewayError::Provider(ProviderError::Malformed(
                        "embedding is empty or has non-finite values".into(),
                    )));
                }
            }
            for (text, values) in batch.iter().zip(vectors) {
                self.cache.insert(&model, text, values)?;
            }
        }
        texts
            .iter()
            .map(|t| {
                let values = self.cache.get(&model, t).expect("cached above");
                Ok(EmbeddingVector {
                    values,
                    model: model.clone(),
                })
            })
            .collect()
    }

    pub fn create_finetune_job(
        &self,
        training_file: &Path,
        base_model: &str,
        hp: &Hyperparams,
    ) -> Result<FinetuneJob, GatewayError> {
        if !training_file.exists() {
            return Err(GatewayError::Precondition(format!(
                "training file {} does not exist",
                training_file.display()
            )));
        }
        let hash =
            short_hash(format!("{}|{base_model}|{hp:?}", training_file.display()).as_bytes());
        self.call(
            "finetune_create",
            &hash,
            || {
                self.provider
                    .create_finetune_job(training_file, base_model, hp)
            },
            |_| (None, None),
        )
    }

    pub fn poll_job(&self, id: &str) -> Result<FinetuneJob, GatewayError> {
        let hash = short_hash(id.as_bytes());
        self.call(
            "finetune_poll",
            &hash,
            || self.provider.poll_job(id),
            |_| (None, None),
        )
    }
}
