//! HTTP client for remote completion endpoints.
//!
//! Requests are POSTed as JSON `{prompt, max_tokens, top_k, temperature, stop, n}`.
//! Responses may be either `{"choices": [{"text": ...}, ...]}` or
//! `{"completions": [...]}`. Servers that ignore `n` and answer with a single
//! choice are detected and then queried once per sample.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::Deserialize;

use super::{BackendConfig, CompletionBackend, CompletionRequest};
use crate::error::{Error, Result};

/// Environment variable that overrides the configured endpoint.
pub const ENDPOINT_ENV: &str = "EMOPROFILE_BACKEND_ENDPOINT";

const BACKOFF_BASE: Duration = Duration::from_millis(50);
const BACKOFF_CAP: Duration = Duration::from_secs(2);

#[derive(Deserialize)]
#[serde(untagged)]
enum CompletionResponse {
    Choices { choices: Vec<Choice> },
    Completions { completions: Vec<String> },
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

impl CompletionResponse {
    fn into_texts(self) -> Vec<String> {
        match self {
            CompletionResponse::Choices { choices } => choices.into_iter().map(|c| c.text).collect(),
            CompletionResponse::Completions { completions } => completions,
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock();
        while *available == 0 {
            self.freed.wait(&mut available);
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock() += 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteBackend {
    agent: ureq::Agent,
    endpoint: String,
    max_retries: u32,
    permits: Permits,
    single_choice_only: AtomicBool,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.endpoint)
            .field("max_retries", &self.max_retries)
            .finish_non_exhaustive()
    }
}

enum Failure {
    Retryable(String),
    Fatal(Error),
}

impl RemoteBackend {
    pub fn new(config: &BackendConfig) -> Result<Self> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| Error::InvalidConfig("remote backend needs an endpoint".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint,
            max_retries: config.max_retries,
            permits: Permits::new(config.max_in_flight.max(1)),
            single_choice_only: AtomicBool::new(false),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, request: &CompletionRequest) -> std::result::Result<Vec<String>, Failure> {
        let _permit = self.permits.acquire();
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Failure::Fatal(Error::BackendProtocol(format!(
                "HTTP {status}: {}",
                body.trim()
            ))));
        }
        response
            .body_mut()
            .read_json::<CompletionResponse>()
            .map(CompletionResponse::into_texts)
            .map_err(|e| Failure::Fatal(Error::BackendProtocol(e.to_string())))
    }

    fn send(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                let delay = BACKOFF_BASE.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(delay.min(BACKOFF_CAP));
            }
            match self.attempt(request) {
                Ok(texts) => return Ok(texts),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(reason)) => {
                    log::debug!("attempt {} to {} failed: {reason}", attempt + 1, self.endpoint);
                    last = reason;
                }
            }
        }
        Err(Error::BackendUnavailable {
            attempts: self.max_retries + 1,
            reason: last,
        })
    }
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        let single = CompletionRequest {
            n: 1,
            ..request.clone()
        };
        let mut texts = if request.n > 1 && !self.single_choice_only.load(Ordering::Relaxed) {
            let texts = self.send(request)?;
            if texts.len() <= 1 {
                self.single_choice_only.store(true, Ordering::Relaxed);
            }
            texts
        } else {
            self.send(&single)?
        };
        while texts.len() < request.n {
            let more = self.send(&single)?;
            if more.is_empty() {
                break;
            }
            texts.extend(more);
        }
        texts.truncate(request.n);
        Ok(texts)
    }
}
