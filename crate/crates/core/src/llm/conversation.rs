use thiserror::Error;

use super::{parse_structured, FieldSpec, LlmClient, LlmError, LlmRequest, Message, ParsedRecord};

/// Appended to a prompt when its first reply could not be used.
pub const JSON_REMINDER: &str = "Return only the JSON.";

#[derive(Debug, Error)]
pub enum StepFailure {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("unusable response after retry: {0}")]
    Invalid(String),
}

/// A multi-turn exchange whose history is resent with every prompt, so later
/// steps see the earlier questions and answers.
pub struct Conversation<'c> {
    client: &'c LlmClient,
    model: String,
    max_tokens: u32,
    messages: Vec<Message>,
}

impl<'c> Conversation<'c> {
    pub fn new(client: &'c LlmClient, model: impl Into<String>) -> Self {
        Self {
            client,
            model: model.into(),
            max_tokens: super::DEFAULT_MAX_TOKENS,
            messages: Vec::new(),
        }
    }

    pub fn with_system(mut self, text: impl Into<String>) -> Self {
        self.messages.push(Message::system(text));
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    fn send(&self, prompt: &str) -> Result<(String, bool), LlmError> {
        let mut messages = self.messages.clone();
        messages.push(Message::user(prompt));
        let req = LlmRequest::new(self.model.clone(), messages).with_max_tokens(self.max_tokens);
        let resp = self.client.complete(&req)?;
        Ok((resp.text, resp.truncated))
    }

    /// Sends `prompt`, parses the reply against `fields` and runs `accept` on
    /// it. A rejected reply is retried once with [`JSON_REMINDER`] appended.
    /// Only the accepted exchange enters the history.
    pub fn ask<T>(
        &mut self,
        prompt: &str,
        fields: &[FieldSpec],
        accept: impl Fn(&ParsedRecord) -> Result<T, String>,
    ) -> Result<T, StepFailure> {
        let check = |text: &str, truncated: bool| -> Result<T, String> {
            if truncated {
                return Err("response truncated at the token limit".into());
            }
            let parsed = parse_structured(text, fields).map_err(|e| e.to_string())?;
            accept(&parsed)
        };
        let (text, truncated) = self.send(prompt)?;
        let first_err = match check(&text, truncated) {
            Ok(v) => {
                self.messages.push(Message::user(prompt));
                self.messages.push(Message::assistant(text));
                return Ok(v);
            }
            Err(e) => e,
        };
        log::debug!("retrying after unusable reply: {first_err}");
        let retry_prompt = format!("{prompt}\n\n{JSON_REMINDER}");
        let (text, truncated) = self.send(&retry_prompt)?;
        match check(&text, truncated) {
            Ok(v) => {
                self.messages.push(Message::user(retry_prompt));
                self.messages.push(Message::assistant(text));
                Ok(v)
            }
            Err(e) => Err(StepFailure::Invalid(e)),
        }
    }
}
