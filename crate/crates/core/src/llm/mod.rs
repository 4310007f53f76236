//! Chat-completion client: templating, content-addressed response cache,
//! retries, structured-output parsing and offline backends.

mod backend;
mod cache;
mod client;
mod conversation;
pub mod mock;
mod parse;
pub mod template;

pub use backend::{Backend, BackendError, BackendReply, HttpBackend, HttpConfig, ReplayBackend};
pub use cache::{CacheRecord, ResponseCache};
pub use client::{AttemptRecord, LlmClient, LlmError, RetryPolicy, Usage};
pub use conversation::{Conversation, StepFailure, JSON_REMINDER};
pub use parse::{parse_structured, FieldKind, FieldSpec, ParseError, ParsedRecord};
pub use template::{prompts, PromptTemplate, RenderError};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// One chat-completion call. Temperature is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn prompt(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self::new(model, vec![Message::user(prompt)])
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    /// Content hash of the model id and the exact message bytes.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model.as_bytes());
        h.update([0u8]);
        for m in &self.messages {
            h.update(match m.role {
                Role::System => b"s",
                Role::User => b"u",
                Role::Assistant => b"a",
            });
            h.update((m.content.len() as u64).to_le_bytes());
            h.update(m.content.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }

    pub(crate) fn digest(&self) -> String {
        let last: String = self.last_user().chars().take(120).collect();
        format!("{} | {} msgs | {}", self.model, self.messages.len(), last.replace('\n', " "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub cache_hit: bool,
    pub attempts: u32,
    pub truncated: bool,
}

/// sha256 of a prompt string; the key used by scripted mocks.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_model_and_messages() {
        let a = LlmRequest::prompt("m1", "hello");
        let b = LlmRequest::prompt("m2", "hello");
        let c = LlmRequest::prompt("m1", "hello ");
        assert_eq!(a.cache_key(), LlmRequest::prompt("m1", "hello").cache_key());
        assert_ne!(a.cache_key(), b.cache_key());
        assert_ne!(a.cache_key(), c.cache_key());
        let split = LlmRequest::new("m1", vec![Message::user("he"), Message::user("llo")]);
        assert_ne!(a.cache_key(), split.cache_key());
    }

    #[test]
    fn temperature_fixed_at_zero() {
        assert_eq!(LlmRequest::prompt("m", "p").temperature, 0.0);
    }
}
