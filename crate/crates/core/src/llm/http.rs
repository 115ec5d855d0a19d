use std::time::Duration;

use log::{debug, warn};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{BackendConfig, Completion, CompletionBackend, LlmError};
use crate::net::{Backoff, RateLimiter};

/// `POST <base_url>/v1/chat/completions`, OpenAI wire shape.
pub struct HttpBackend {
    client: Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_tokens: u32,
    max_retries: u32,
    backoff: Backoff,
    limiter: Option<RateLimiter>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

enum AttemptError {
    Transient(LlmError),
    Permanent(LlmError),
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let api_key = match &config.api_key_env {
            Some(var) if !var.is_empty() => {
                Some(std::env::var(var).map_err(|_| LlmError::MissingApiKey(var.clone()))?)
            }
            _ => None,
        };
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!(
                "{}/v1/chat/completions",
                config.base_url.trim_end_matches('/')
            ),
            model: config.model.clone(),
            api_key,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            max_retries: config.max_retries,
            backoff: config.backoff(),
            limiter: config.rate_limit.and_then(RateLimiter::per_second),
        })
    }

    fn attempt(&self, prompt: &str, attempts: u32) -> Result<String, AttemptError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let body = ChatRequest {
            model: &self.model,
            messages: [Message {
                role: "user",
                content: prompt,
            }],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                AttemptError::Transient(LlmError::Timeout { attempts })
            } else {
                AttemptError::Transient(LlmError::Unreachable {
                    message: e.to_string(),
                    attempts,
                })
            }
        })?;

        let status = response.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(AttemptError::Permanent(LlmError::AuthFailure(format!(
                "HTTP {status}"
            ))));
        }
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(AttemptError::Transient(LlmError::RateLimited { attempts }));
        }
        if status.is_server_error() {
            return Err(AttemptError::Transient(LlmError::Http {
                status: status.as_u16(),
                attempts,
            }));
        }
        if !status.is_success() {
            return Err(AttemptError::Permanent(LlmError::Http {
                status: status.as_u16(),
                attempts,
            }));
        }
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                AttemptError::Transient(LlmError::Timeout { attempts })
            } else {
                AttemptError::Permanent(LlmError::MalformedResponse(e.to_string()))
            }
        })?;
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| AttemptError::Permanent(LlmError::MalformedResponse(e.to_string())))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                AttemptError::Permanent(LlmError::MalformedResponse(
                    "missing choices[0].message.content".into(),
                ))
            })
    }
}

impl CompletionBackend for HttpBackend {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(prompt, attempts) {
                Ok(text) => return Ok(Completion { text, attempts }),
                Err(AttemptError::Permanent(e)) => return Err(e),
                Err(AttemptError::Transient(e)) => {
                    if attempts > self.max_retries {
                        warn!("giving up after {attempts} attempts: {e}");
                        return Err(e);
                    }
                    let delay = self.backoff.delay(attempts);
                    debug!("attempt {attempts} failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                }
            }
        }
    }
}
