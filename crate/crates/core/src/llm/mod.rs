//! Provider-agnostic access to a chat model: dialogues, the provider trait,
//! reply parsing, result summaries, and a deterministic mock.

mod dialogue;
mod generate;
mod mock;
mod parse;
mod remote;

pub use dialogue::{Dialogue, DialogueError, Role, Turn};
pub use generate::{
    execute_dispatch, explain_request, feedback_request, summarize_result, summary_request, GenerateError, KeyPoints,
    KEY_POINT_MAX_WORDS, SUMMARY_MAX_WORDS,
};
pub use mock::{MockFaults, MockProvider};
pub use parse::{format_generations, parse_generations, parse_single, ParseError};
pub use remote::{
    HttpResponse, RemoteChatProvider, RemoteConfig, RetryPolicy, Transport, TransportError, DEFAULT_API_KEY_ENV,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self { temperature: 0.7, max_output_tokens: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("dialogue must end with a user turn")]
    NotAwaitingReply,
    #[error("temperature {0} outside [0, 2]")]
    BadTemperature(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited,
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<LlmError> },
}

impl LlmError {
    /// Whether a retry might succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Transport(_) | LlmError::Timeout | LlmError::RateLimited => true,
            LlmError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// A chat model. Implementations must be callable from several threads at once.
pub trait Provider: Send + Sync {
    fn complete(&self, dialogue: &Dialogue, params: &CompletionParams) -> Result<String, LlmError>;
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn complete(&self, dialogue: &Dialogue, params: &CompletionParams) -> Result<String, LlmError> {
        (**self).complete(dialogue, params)
    }
}

/// Checks preconditions, then asks the provider for the next assistant turn.
/// The caller appends the reply to its dialogue.
pub fn complete(provider: &dyn Provider, dialogue: &Dialogue, params: &CompletionParams) -> Result<String, LlmError> {
    if !dialogue.awaits_reply() {
        return Err(LlmError::NotAwaitingReply);
    }
    if !(0.0..=2.0).contains(&params.temperature) {
        return Err(LlmError::BadTemperature(params.temperature.to_string()));
    }
    provider.complete(dialogue, params)
}

/// Regeneration hints offered on every generated node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    BeCreative,
    BeMoreSpecific,
    BeBrief,
}

impl Feedback {
    pub const ALL: [Feedback; 3] = [Feedback::BeCreative, Feedback::BeMoreSpecific, Feedback::BeBrief];

    pub fn instruction(self) -> &'static str {
        match self {
            Feedback::BeCreative => "Be creative.",
            Feedback::BeMoreSpecific => "Be more specific.",
            Feedback::BeBrief => "Be brief.",
        }
    }
}
