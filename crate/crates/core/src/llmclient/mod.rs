//! Chat and embedding transport with deterministic mock backends.
//!
//! The HTTP backend speaks the chat-completions JSON shape:
//!
//! ```text
//! POST {base_url}/chat/completions
//! Authorization: Bearer $API_KEY
//! {"model": "...", "messages": [{"role": "system", "content": "..."},
//!                               {"role": "user", "content": "..."}],
//!  "temperature": 1e-7, "max_tokens": 512}
//! -> {"choices": [{"message": {"content": "..."}}],
//!     "usage": {"prompt_tokens": 10, "completion_tokens": 5}}
//!
//! POST {base_url}/embeddings
//! {"model": "...", "input": "..."} -> {"data": [{"embedding": [0.1, ...]}]}
//! ```
//!
//! Mocks never touch the network. They answer from the [`Attachment`] a
//! caller puts on the request, so tests can close the loop exactly.

mod http;
mod mock;

pub use mock::{mock_embedding, MOCK_EMBEDDING_DIM};

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 1e-7;
pub const DEFAULT_API_KEY_ENV: &str = "PROCMON_API_KEY";
pub const BASE_URL_ENV: &str = "PROCMON_BASE_URL";

/// Ground truth a mock backend answers from. Never sent over the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attachment {
    /// Facts per time instant. `per_instant` answers get one `At step N:`
    /// line per instant; otherwise a single line for the lone instant.
    Facts {
        steps: Vec<(usize, Vec<String>)>,
        universe: Vec<String>,
        per_instant: bool,
    },
    /// A list answer, one item per line.
    Items(Vec<String>),
    /// Echoed verbatim by the oracle.
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    #[serde(skip)]
    pub attachment: Option<Attachment>,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            system: system.into(),
            user: user.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            attachment: None,
        }
    }

    pub fn with_attachment(mut self, a: Attachment) -> Self {
        self.attachment = Some(a);
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.user.trim().is_empty() {
            return Err(LlmError::InvalidRequest("empty request text".into()));
        }
        Ok(())
    }

    /// FNV-1a over system and user text; seeds the mock streams.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.system.bytes().chain([0]).chain(self.user.bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub backend: String,
    pub latency_ms: u64,
    pub attempts: u32,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Matched case-insensitively as a substring of the user text.
    pub when: String,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendKind {
    HttpChat {
        base_url: String,
        #[serde(default = "default_model")]
        model: String,
        #[serde(default)]
        embedding_model: Option<String>,
        #[serde(default = "default_key_env")]
        api_key_env: String,
    },
    MockOracle,
    MockLossy { rate: f64 },
    MockHallucinating { rate: f64 },
    MockScripted {
        #[serde(default)]
        rules: Vec<ScriptRule>,
        /// TOML file with `[[rule]]` tables, merged after inline rules.
        #[serde(default)]
        file: Option<PathBuf>,
    },
}

fn default_model() -> String {
    "gpt-4o".into()
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    250
}

fn default_timeout() -> u64 {
    60
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        BackendConfig {
            kind,
            seed: 0,
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn oracle() -> Self {
        Self::new(BackendKind::MockOracle)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Short names used on the command line: `mock`, `mock-oracle`,
    /// `mock-lossy:0.3`, `mock-hallucinating:0.1`, `http:URL`.
    pub fn from_short(spec: &str) -> Result<Self, LlmError> {
        let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let rate = || -> Result<f64, LlmError> {
            arg.parse()
                .map_err(|_| LlmError::Config(format!("`{spec}` needs a rate, e.g. {name}:0.3")))
        };
        let kind = match name {
            "mock" | "mock-oracle" => BackendKind::MockOracle,
            "mock-lossy" => BackendKind::MockLossy { rate: rate()? },
            "mock-hallucinating" => BackendKind::MockHallucinating { rate: rate()? },
            "http" => BackendKind::HttpChat {
                base_url: if arg.is_empty() {
                    std::env::var(BASE_URL_ENV).map_err(|_| {
                        LlmError::Config(format!("http backend needs a URL or ${BASE_URL_ENV}"))
                    })?
                } else {
                    arg.to_string()
                },
                model: default_model(),
                embedding_model: None,
                api_key_env: default_key_env(),
            },
            other => return Err(LlmError::Config(format!("unknown backend `{other}`"))),
        };
        let cfg = Self::new(kind);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match &self.kind {
            BackendKind::HttpChat { base_url, .. } => {
                let u = url::Url::parse(base_url)
                    .map_err(|e| LlmError::Config(format!("invalid base URL `{base_url}`: {e}")))?;
                if !matches!(u.scheme(), "http" | "https") {
                    return Err(LlmError::Config(format!("unsupported URL scheme `{}`", u.scheme())));
                }
            }
            BackendKind::MockLossy { rate } | BackendKind::MockHallucinating { rate } => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(LlmError::Config(format!("rate {rate} outside [0, 1]")));
                }
            }
            BackendKind::MockOracle | BackendKind::MockScripted { .. } => {}
        }
        Ok(())
    }

    pub fn is_mock(&self) -> bool {
        !matches!(self.kind, BackendKind::HttpChat { .. })
    }

    pub fn name(&self) -> String {
        match &self.kind {
            BackendKind::HttpChat { base_url, model, .. } => format!("http-chat({model} @ {base_url})"),
            BackendKind::MockOracle => "mock-oracle".into(),
            BackendKind::MockLossy { rate } => format!("mock-lossy({rate})"),
            BackendKind::MockHallucinating { rate } => format!("mock-hallucinating({rate})"),
            BackendKind::MockScripted { .. } => "mock-scripted".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("network error from {backend}: {message}")]
    Network { backend: String, message: String },
    #[error("{backend} rejected the request with status {status}: {body}")]
    Status { backend: String, status: u16, body: String },
    #[error("{backend} failed after {attempts} attempts (last status {last_status:?})")]
    RetriesExhausted {
        backend: String,
        attempts: u32,
        last_status: Option<u16>,
    },
    #[error("authentication: {0}")]
    Auth(String),
    #[error("malformed response from {backend}: {message}")]
    Malformed { backend: String, message: String },
    #[error("{0}")]
    Mock(String),
}

/// A configured backend. Cheap to share across threads.
#[derive(Clone)]
pub struct LlmClient {
    config: BackendConfig,
    inner: Inner,
}

#[derive(Clone)]
enum Inner {
    Http(http::HttpBackend),
    Mock(mock::MockBackend),
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient").field("backend", &self.config.name()).finish()
    }
}

impl LlmClient {
    pub fn new(config: BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let inner = match &config.kind {
            BackendKind::HttpChat {
                base_url,
                model,
                embedding_model,
                api_key_env,
            } => Inner::Http(http::HttpBackend::new(
                base_url,
                model,
                embedding_model.as_deref(),
                api_key_env,
                Duration::from_secs(config.timeout_secs),
                config.max_retries,
                Duration::from_millis(config.backoff_ms),
            )?),
            _ => Inner::Mock(mock::MockBackend::new(&config)?),
        };
        Ok(LlmClient { config, inner })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let start = std::time::Instant::now();
        let mut resp = match &self.inner {
            Inner::Http(h) => h.chat(request)?,
            Inner::Mock(m) => m.chat(request)?,
        };
        resp.latency_ms = start.elapsed().as_millis() as u64;
        Ok(resp)
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError> {
        if text.trim().is_empty() {
            return Err(LlmError::InvalidRequest("empty text".into()));
        }
        match &self.inner {
            Inner::Http(h) => h.embed(text),
            Inner::Mock(_) => Ok(mock_embedding(text)),
        }
    }
}

pub fn chat(request: &ChatRequest, config: &BackendConfig) -> Result<ChatResponse, LlmError> {
    LlmClient::new(config.clone())?.chat(request)
}

pub fn embed(text: &str, config: &BackendConfig) -> Result<Vec<f32>, LlmError> {
    LlmClient::new(config.clone())?.embed(text)
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
    let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Replace every occurrence of `secret` with `***`.
pub fn redact(text: &str, secret: &str) -> String {
    if secret.is_empty() {
        text.to_string()
    } else {
        text.replace(secret, "***")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperature_defaults_low() {
        assert_eq!(ChatRequest::new("s", "u").temperature, 1e-7);
    }

    #[test]
    fn request_validation() {
        assert!(ChatRequest::new("s", "  ").validate().is_err());
        let mut r = ChatRequest::new("s", "u");
        r.temperature = 2.5;
        assert!(r.validate().is_err());
    }

    #[test]
    fn config_from_toml() {
        let c: BackendConfig = toml::from_str("kind = \"mock-lossy\"\nrate = 0.3\nseed = 9").unwrap();
        assert_eq!(c.kind, BackendKind::MockLossy { rate: 0.3 });
        assert_eq!(c.seed, 9);
        assert_eq!(c.max_retries, 3);
        let c: BackendConfig =
            toml::from_str("kind = \"http-chat\"\nbase_url = \"http://localhost:8080/v1\"").unwrap();
        assert!(c.validate().is_ok());
        let bad: BackendConfig = toml::from_str("kind = \"http-chat\"\nbase_url = \"not a url\"").unwrap();
        assert!(bad.validate().is_err());
        let bad: BackendConfig = toml::from_str("kind = \"mock-lossy\"\nrate = 1.5").unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn short_names() {
        assert_eq!(BackendConfig::from_short("mock").unwrap().kind, BackendKind::MockOracle);
        assert_eq!(
            BackendConfig::from_short("mock-hallucinating:0.2").unwrap().kind,
            BackendKind::MockHallucinating { rate: 0.2 }
        );
        assert!(BackendConfig::from_short("mock-lossy").is_err());
        assert!(BackendConfig::from_short("gpt").is_err());
    }

    #[test]
    fn redaction() {
        assert_eq!(redact("Bearer sk-123", "sk-123"), "Bearer ***");
        assert_eq!(redact("x", ""), "x");
    }
}
