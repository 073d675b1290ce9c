//! Chat-completion backends and the prompt/ReAct plumbing built on them.

mod http;
mod mock;
mod prompt;
mod react;

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig};
pub use mock::{Matcher, MockBackend, MockRule, MockScript};
pub use prompt::{placeholders, render_prompt, FewShot, PromptSet, PromptTemplate, ReasoningStyle};
pub use react::{parse_action, run_react, ReactAction, ReactError, ReactOutcome, ReactStep, ReactTools};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default)]
    pub temperature: f64,
    pub max_tokens: u32,
}

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

impl ChatRequest {
    pub fn new(system_prompt: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            messages: vec![ChatMessage::user(user)],
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Messages must be non-empty and alternate user/assistant starting with user.
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        for (i, msg) in self.messages.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if msg.role != expected {
                return Err(LlmError::InvalidRequest(format!(
                    "message {i} should have role {expected:?}"
                )));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Flat text form of the whole request; what mock rules match against.
    pub fn transcript(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "SYSTEM:\n{}", self.system_prompt);
        for msg in &self.messages {
            let role = match msg.role {
                Role::User => "USER",
                Role::Assistant => "ASSISTANT",
            };
            let _ = writeln!(out, "\n{role}:\n{}", msg.content);
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("missing placeholder binding {0}")]
    MissingPlaceholder(String),
    #[error("invalid mock script: {0}")]
    Script(String),
    #[error("invalid prompt template: {0}")]
    Template(String),
}

impl LlmError {
    /// Backend could not be reached or did not answer usefully.
    pub fn is_unavailable(&self) -> bool {
        matches!(
            self,
            LlmError::Timeout
                | LlmError::HttpStatus { .. }
                | LlmError::Transport(_)
                | LlmError::MissingCredential(_)
        )
    }
}

/// A chat-completion provider. Implementations are shared across sessions.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;

    fn name(&self) -> &str;
}
