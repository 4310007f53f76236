use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::{LlmRequest, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub truncated: bool,
}

impl BackendReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            prompt_tokens: 0,
            completion_tokens: 0,
            truncated: false,
        }
    }
}

/// Transport and rate-limit failures are retried by the client; the others
/// are returned immediately.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("request rejected: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport(_) | Self::RateLimited(_))
    }
}

pub trait Backend: Send + Sync {
    fn send(&self, request: &LlmRequest) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub api_key_env: String,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "VOC_API_KEY".into(),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Chat-completions over HTTP. The credential is read from the environment
/// once, at construction.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: String,
}

impl HttpBackend {
    pub fn from_env(config: &HttpConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                BackendError::Config(format!("environment variable {} is not set", config.api_key_env))
            })?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key,
        })
    }

    fn body(request: &LlmRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({"role": role, "content": m.content})
            })
            .collect();
        json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

fn reply_from_json(v: &Value) -> Result<BackendReply, BackendError> {
    let choice = v
        .pointer("/choices/0")
        .ok_or_else(|| BackendError::Fatal("response has no choices".into()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let truncated = choice.get("finish_reason").and_then(Value::as_str) == Some("length");
    let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(BackendReply {
        text,
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
        truncated,
    })
}

impl Backend for HttpBackend {
    fn send(&self, request: &LlmRequest) -> Result<BackendReply, BackendError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(Self::body(request))
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {
                let v: Value = serde_json::from_str(&body)
                    .map_err(|e| BackendError::Transport(format!("invalid response body: {e}")))?;
                reply_from_json(&v)
            }
            429 => Err(BackendError::RateLimited(body)),
            500..=599 => Err(BackendError::Transport(format!("HTTP {status}: {body}"))),
            _ => Err(BackendError::Fatal(format!("HTTP {status}: {body}"))),
        }
    }
}

/// Serves nothing: every request must be answered from the cache.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReplayBackend;

impl Backend for ReplayBackend {
    fn send(&self, request: &LlmRequest) -> Result<BackendReply, BackendError> {
        Err(BackendError::Fatal(format!(
            "offline replay: no cached response for {}",
            request.digest()
        )))
    }
}
