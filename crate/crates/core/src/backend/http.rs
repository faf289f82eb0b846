//! OpenAI-compatible HTTP backend.

use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, FinishReason, RateLimiter, Usage};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "MEMOLOOP_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL up to (not including) `/chat/completions`, e.g. `http://host/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub request_timeout: Duration,
    pub requests_per_minute: Option<u32>,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
            request_timeout: Duration::from_secs(300),
            requests_per_minute: None,
        }
    }

    /// Same as [`HttpConfig::new`] with the API key read from the environment.
    pub fn from_env(base_url: impl Into<String>) -> Self {
        Self {
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            ..Self::new(base_url)
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    limiter: Option<RateLimiter>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base_url", &self.config.base_url)
            .field("max_attempts", &self.config.max_attempts)
            .finish_non_exhaustive()
    }
}

enum Failure {
    Retryable(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        let limiter = config.requests_per_minute.map(RateLimiter::per_minute);
        Self { config, agent, limiter }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Result<ChatResponse, Failure> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut request = self.agent.post(&self.endpoint());
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        match status {
            200..=299 => parse_response(&text).map_err(Failure::Fatal),
            401 | 403 => Err(Failure::Fatal(BackendError::Auth { status })),
            408 | 429 | 500..=599 => Err(Failure::Retryable(format!("HTTP {status}: {text}"))),
            _ => Err(Failure::Fatal(BackendError::Status { status, body: text })),
        }
    }
}

/// JSON body sent for `request`.
pub fn request_body(request: &ChatRequest) -> Value {
    let mut body = json!({
        "model": request.model,
        "messages": request.messages,
        "temperature": request.temperature,
    });
    if let Some(max) = request.max_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

fn parse_response(text: &str) -> Result<ChatResponse, BackendError> {
    let value: Value = serde_json::from_str(text).map_err(|e| BackendError::Decode(e.to_string()))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Decode("response has no choices".into()))?;
    let content = choice
        .get("message")
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str);
    let finish_reason = match (content, choice.get("finish_reason").and_then(Value::as_str)) {
        (None, _) => FinishReason::Error,
        (Some(_), Some("length")) => FinishReason::Length,
        (Some(_), _) => FinishReason::Stop,
    };
    let usage = value.get("usage").and_then(|u| {
        Some(Usage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok(ChatResponse {
        content: content.unwrap_or_default().to_string(),
        finish_reason,
        usage,
    })
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let body = request_body(request);
        let attempts = self.config.max_attempts.max(1);
        let mut backoff = self.config.initial_backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(response) => return Ok(response),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(message)) => {
                    tracing::warn!(attempt, %message, "chat completion failed");
                    last = message;
                    if attempt < attempts {
                        thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last,
        })
    }
}
