//! Chat-completion backends and the batch prediction driver.

mod batch;
mod cache;
mod http;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::Backoff;

pub use batch::{batch_predict, BatchOptions};
pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use http::HttpBackend;
pub use mock::MockBackend;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("HTTP {status} after {attempts} attempt(s)")]
    Http { status: u16, attempts: u32 },
    #[error("endpoint unreachable after {attempts} attempt(s): {message}")]
    Unreachable { message: String, attempts: u32 },
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingApiKey(String),
    #[error("mock backend has no response for this prompt")]
    NoCannedResponse,
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("writing prediction log: {0}")]
    Log(String),
}

impl LlmError {
    /// Errors that end a whole batch rather than a single record.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            Self::AuthFailure(_) | Self::MissingApiKey(_) | Self::Config(_) | Self::Log(_)
        )
    }

    pub fn attempts(&self) -> u32 {
        match self {
            Self::Timeout { attempts }
            | Self::RateLimited { attempts }
            | Self::Http { attempts, .. }
            | Self::Unreachable { attempts, .. } => *attempts,
            _ => 1,
        }
    }
}

/// Connection and sampling settings for one chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token; no
    /// `Authorization` header is sent when unset.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// Requests per second across all workers; unlimited when unset.
    pub rate_limit: Option<f64>,
    pub backoff_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: "georef-mistral-7b".into(),
            api_key_env: None,
            temperature: 0.0,
            max_tokens: 256,
            timeout_secs: 60.0,
            max_retries: 5,
            rate_limit: None,
            backoff_base_ms: 1000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(LlmError::Config("timeout_secs must be > 0".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(LlmError::Config("temperature must be >= 0".into()));
        }
        if let Some(rate) = self.rate_limit {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(LlmError::Config("rate_limit must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn backoff(&self) -> Backoff {
        Backoff {
            base: Duration::from_millis(self.backoff_base_ms),
            ..Backoff::default()
        }
    }
}

/// A completed request: first message text plus how many attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

pub trait CompletionBackend: Send + Sync {
    fn model_name(&self) -> &str;

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError>;
}
