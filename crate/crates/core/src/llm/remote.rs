use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionParams, Dialogue, LlmError, Provider, Role};

pub const DEFAULT_API_KEY_ENV: &str = "PREWRITE_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("{0}")]
    Io(String),
}

/// Minimal HTTP seam so the provider can run against a scripted fake.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &Value) -> Result<HttpResponse, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
}

impl RemoteConfig {
    /// Reads the API key from `key_env` (empty values count as unset).
    pub fn from_env(base_url: impl Into<String>, model: impl Into<String>, key_env: &str) -> Self {
        let api_key = std::env::var(key_env).ok().filter(|k| !k.is_empty());
        Self { base_url: base_url.into(), model: model.into(), api_key }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { retries: 2, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base * 2^attempt.
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

/// Chat-completions style HTTP provider.
pub struct RemoteChatProvider<T> {
    transport: T,
    config: RemoteConfig,
    retry: RetryPolicy,
    sleep: Sleeper,
}

impl<T: Transport> RemoteChatProvider<T> {
    pub fn new(transport: T, config: RemoteConfig) -> Self {
        Self { transport, config, retry: RetryPolicy::default(), sleep: Box::new(std::thread::sleep) }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Replaces the backoff sleep, e.g. to record delays in tests.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    pub fn request_body(&self, dialogue: &Dialogue, params: &CompletionParams) -> Value {
        let messages: Vec<Value> = dialogue
            .turns()
            .iter()
            .map(|t| {
                let role = match t.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({ "role": role, "content": t.text })
            })
            .collect();
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, LlmError> {
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(key) = &self.config.api_key {
            headers.push(("Authorization".to_string(), format!("Bearer {key}")));
        }
        let resp = self.transport.post_json(&self.config.endpoint(), &headers, body).map_err(|e| match e {
            TransportError::Timeout => LlmError::Timeout,
            TransportError::Io(m) => LlmError::Transport(m),
        })?;
        match resp.status {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth(resp.body)),
            429 => return Err(LlmError::RateLimited),
            status => return Err(LlmError::Http { status, body: resp.body }),
        }
        let v: Value = serde_json::from_str(&resp.body).map_err(|e| LlmError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))
    }
}

impl<T: Transport> Provider for RemoteChatProvider<T> {
    fn complete(&self, dialogue: &Dialogue, params: &CompletionParams) -> Result<String, LlmError> {
        let body = self.request_body(dialogue, params);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt < self.retry.retries => {
                    (self.sleep)(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(LlmError::Exhausted { attempts: attempt + 1, last: Box::new(e) })
                }
                Err(e) => return Err(e),
            }
        }
    }
}
