//! Chat-completions-style backend abstraction.
//!
//! [`ChatBackend`] is the seam between the batch runner and whatever serves
//! the model: [`HttpChatBackend`] speaks the common chat-completions JSON
//! dialect over HTTP, and [`crate::testing::ScriptedBackend`] answers from a
//! script for deterministic tests.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

/// Deterministic generation settings sent with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub seed: i64,
    pub max_output_tokens: usize,
    /// Reasoning-phase token cap; sent only to backends that declare
    /// reasoning support.
    pub thinking_budget: Option<usize>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            seed: 42,
            max_output_tokens: 20_000,
            thinking_budget: Some(15_000),
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_output_tokens == 0 {
            return Err(BackendError::Config(
                "max_output_tokens must be positive".into(),
            ));
        }
        if let Some(budget) = self.thinking_budget {
            if budget > self.max_output_tokens {
                return Err(BackendError::Config(format!(
                    "thinking_budget {budget} exceeds max_output_tokens {}",
                    self.max_output_tokens
                )));
            }
        }
        Ok(())
    }
}

/// What the backend can do; gates image payloads and the thinking budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    #[serde(default)]
    pub vision: bool,
    #[serde(default)]
    pub reasoning: bool,
}

/// Endpoint description for an HTTP backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL up to (not including) `/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer credential; the
    /// variable itself is read at request time.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub capabilities: Capabilities,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    300
}

/// Retry schedule for transient failures. Backoff is deterministic
/// (no jitter) so mock-backed runs reproduce byte-for-byte.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 250,
            backoff_multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Backoff before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64
            * self.backoff_multiplier.powi(retry.saturating_sub(1) as i32);
        Duration::from_millis(ms as u64)
    }
}

/// One part of a chat message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { url: String },
}

/// A chat message (the toolkit only sends user messages).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn user_text(text: impl Into<String>) -> Self {
        Self {
            role: "user".to_string(),
            content: vec![ContentPart::Text { text: text.into() }],
        }
    }

    /// Concatenated text parts, for mocks that key on the prompt.
    pub fn text(&self) -> String {
        self.content
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text { text } => Some(text.as_str()),
                ContentPart::ImageUrl { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A fully assembled request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub params: GenerationParams,
}

impl ChatRequest {
    pub fn user(text: impl Into<String>, params: GenerationParams) -> Self {
        Self {
            messages: vec![ChatMessage::user_text(text)],
            params,
        }
    }

    /// All text content, for script lookup in mocks.
    pub fn text(&self) -> String {
        self.messages
            .iter()
            .map(ChatMessage::text)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Backend answer plus token accounting when the server reports it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum BackendError {
    #[error("backend configuration error: {0}")]
    Config(String),
    #[error("backend authentication error: {0}")]
    Auth(String),
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

/// A chat-style completion backend.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    /// Declared capabilities; gates image payloads and the thinking budget.
    fn capabilities(&self) -> Capabilities;

    /// Cheap configuration check run before the first request of a batch.
    fn validate(&self) -> Result<(), BackendError> {
        Ok(())
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

/// HTTP chat-completions client.
pub struct HttpChatBackend {
    config: EndpointConfig,
    client: reqwest::Client,
}

impl HttpChatBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        if config.base_url.trim().is_empty() {
            return Err(BackendError::Config("base_url is empty".into()));
        }
        reqwest::Url::parse(&config.base_url)
            .map_err(|e| BackendError::Config(format!("invalid base_url: {e}")))?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(Self { config, client })
    }

    fn credential(&self) -> Result<Option<String>, BackendError> {
        match &self.config.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                BackendError::Auth(format!("credential environment variable {var} is not set"))
            }),
        }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn request_body(&self, request: &ChatRequest) -> serde_json::Value {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| {
                // single text part collapses to a plain string for
                // compatibility with text-only servers
                if let [ContentPart::Text { text }] = m.content.as_slice() {
                    json!({"role": m.role, "content": text})
                } else {
                    json!({"role": m.role, "content": m.content})
                }
            })
            .collect();
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.params.temperature,
            "seed": request.params.seed,
            "max_tokens": request.params.max_output_tokens,
        });
        if self.config.capabilities.reasoning {
            if let Some(budget) = request.params.thinking_budget {
                body["thinking_budget"] = json!(budget);
            }
        }
        body
    }
}

#[async_trait]
impl ChatBackend for HttpChatBackend {
    fn capabilities(&self) -> Capabilities {
        self.config.capabilities
    }

    fn validate(&self) -> Result<(), BackendError> {
        self.credential().map(|_| ())
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut http = self
            .client
            .post(self.endpoint())
            .json(&self.request_body(request));
        if let Some(token) = self.credential()? {
            http = http.bearer_auth(token);
        }
        let response = http
            .send()
            .await
            .map_err(|e| BackendError::Transient(format!("request failed: {e}")))?;
        let status = response.status();
        let body = response
            .text()
            .await
            .map_err(|e| BackendError::Transient(format!("reading body: {e}")))?;
        if status == reqwest::StatusCode::UNAUTHORIZED
            || status == reqwest::StatusCode::FORBIDDEN
        {
            return Err(BackendError::Auth(format!("{status}: {body}")));
        }
        if status.is_server_error()
            || status == reqwest::StatusCode::TOO_MANY_REQUESTS
            || status == reqwest::StatusCode::REQUEST_TIMEOUT
        {
            return Err(BackendError::Transient(format!("{status}: {body}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("{status}: {body}")));
        }

        let value: serde_json::Value = serde_json::from_str(&body)
            .map_err(|e| BackendError::Fatal(format!("malformed response JSON: {e}")))?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| {
                BackendError::Fatal("response carries no choices[0].message.content".into())
            })?
            .to_string();
        Ok(ChatResponse {
            content,
            prompt_tokens: value["usage"]["prompt_tokens"].as_u64(),
            completion_tokens: value["usage"]["completion_tokens"].as_u64(),
        })
    }
}
