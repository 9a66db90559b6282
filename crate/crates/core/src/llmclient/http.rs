use std::thread::sleep;
use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::{redact, ChatRequest, ChatResponse, LlmError};

#[derive(Clone)]
pub(super) struct HttpBackend {
    client: Client,
    base_url: String,
    model: String,
    embedding_model: String,
    api_key_env: String,
    max_retries: u32,
    backoff: Duration,
}

enum Failure {
    Retryable(Option<u16>, String),
    Fatal(LlmError),
}

impl HttpBackend {
    pub(super) fn new(
        base_url: &str,
        model: &str,
        embedding_model: Option<&str>,
        api_key_env: &str,
        timeout: Duration,
        max_retries: u32,
        backoff: Duration,
    ) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            embedding_model: embedding_model.unwrap_or("text-embedding-3-small").to_string(),
            api_key_env: api_key_env.to_string(),
            max_retries,
            backoff,
        })
    }

    fn name(&self) -> String {
        format!("http-chat({})", self.base_url)
    }

    fn key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }

    /// POST with exponential backoff on 429, 5xx and transport errors.
    fn post(&self, path: &str, body: &Value) -> Result<(Value, u32), LlmError> {
        let url = format!("{}{}", self.base_url, path);
        let key = self.key();
        log::debug!(
            "POST {url} {}",
            redact(&body.to_string(), key.as_deref().unwrap_or(""))
        );
        let mut last_status = None;
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.try_post(&url, body, key.as_deref()) {
                Ok(v) => return Ok((v, attempt + 1)),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(status, msg)) => {
                    log::warn!(
                        "attempt {} to {url} failed: {}",
                        attempt + 1,
                        redact(&msg, key.as_deref().unwrap_or(""))
                    );
                    last_status = status;
                }
            }
        }
        Err(LlmError::RetriesExhausted {
            backend: self.name(),
            attempts: self.max_retries + 1,
            last_status,
        })
    }

    fn try_post(&self, url: &str, body: &Value, key: Option<&str>) -> Result<Value, Failure> {
        let mut req = self.client.post(url).json(body);
        if let Some(k) = key {
            req = req.bearer_auth(k);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                return Err(Failure::Retryable(None, e.to_string()))
            }
            Err(e) => {
                return Err(Failure::Fatal(LlmError::Network {
                    backend: self.name(),
                    message: e.to_string(),
                }))
            }
        };
        let status = resp.status().as_u16();
        let text = resp.text().unwrap_or_default();
        if status == 429 || (500..600).contains(&status) {
            return Err(Failure::Retryable(Some(status), format!("status {status}")));
        }
        if status == 401 || status == 403 {
            return Err(Failure::Fatal(LlmError::Auth(format!(
                "{} returned {status}; check ${}",
                self.name(),
                self.api_key_env
            ))));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(LlmError::Status {
                backend: self.name(),
                status,
                body: redact(&text, key.unwrap_or("")),
            }));
        }
        serde_json::from_str(&text).map_err(|e| {
            Failure::Fatal(LlmError::Malformed {
                backend: self.name(),
                message: e.to_string(),
            })
        })
    }

    pub(super) fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
        });
        if let Some(m) = req.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let (v, attempts) = self.post("/chat/completions", &body)?;
        log::debug!("response {v}");
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::Malformed {
                backend: self.name(),
                message: "missing choices[0].message.content".into(),
            })?
            .to_string();
        let tokens = |k: &str| v["usage"][k].as_u64().map(|n| n as u32);
        Ok(ChatResponse {
            text,
            backend: self.name(),
            latency_ms: 0,
            attempts,
            prompt_tokens: tokens("prompt_tokens"),
            completion_tokens: tokens("completion_tokens"),
        })
    }

    pub(super) fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError> {
        let body = json!({"model": self.embedding_model, "input": text});
        let (v, _) = self.post("/embeddings", &body)?;
        v["data"][0]["embedding"]
            .as_array()
            .and_then(|a| a.iter().map(|x| x.as_f64().map(|f| f as f32)).collect())
            .ok_or_else(|| LlmError::Malformed {
                backend: self.name(),
                message: "missing data[0].embedding".into(),
            })
    }
}
