//! Chat-completion abstraction: HTTP client, response cache, retry policy and
//! a scripted mock.

mod cache;
mod client;
mod http;
mod mock;
mod retry;
mod types;

use std::time::Duration;

use thiserror::Error;

pub(crate) use cache::write_atomic;
pub use cache::ResponseCache;
pub use client::LlmClient;
pub use http::{HttpBackend, API_KEY_ENV, BASE_URL_ENV, MODEL_ENV};
pub use mock::{MockBackend, MockScript};
pub use retry::RetryPolicy;
pub use types::{ChatMessage, ChatRequest, ChatResponse, Role, Usage};

#[cfg(test)]
pub(crate) use http::test_server as http_test_server;

/// Environment variable naming the on-disk response cache directory.
pub const CACHE_DIR_ENV: &str = "CMO_CACHE_DIR";

#[derive(Debug, Clone, Error)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited by the backend")]
    RateLimited { retry_after: Option<Duration> },
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("mock backend has no scripted response for prompt digest {digest}")]
    MockMiss { digest: String },
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("response cache: {0}")]
    Cache(String),
}

impl LlmError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Timeout | LlmError::RateLimited { .. } | LlmError::Transport(_) => true,
            LlmError::Server { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// Anything that can answer a chat request. Implementations do not cache or
/// retry; [`LlmClient`] layers both on top.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}
