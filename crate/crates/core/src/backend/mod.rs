//! Emotion-classifier backends and the sampling logic built on top of them.
//!
//! A backend is anything that continues a text prefix: [`MockBackend`] reads
//! the prefix with the turn codec and answers from a keyword lexicon,
//! [`RemoteBackend`] forwards it to an HTTP completion endpoint and
//! [`ScriptedBackend`] replays canned generations for fixtures.

mod mock;
mod remote;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use mock::{Lexicon, LexiconVerdict, MockBackend, MOCK_FALLBACK_EMOTION};
pub use remote::{RemoteBackend, ENDPOINT_ENV};
pub use scripted::ScriptedBackend;

use crate::codec::{self, ConversationTurn, END_OF_TEXT};
use crate::emotion::{Emotion, EmotionSampleSet};
use crate::error::{Error, Result};

/// A completion request. This is also the JSON body sent to remote backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub top_k: usize,
    pub temperature: f64,
    pub stop: Vec<String>,
    pub n: usize,
}

/// Continues a prompt prefix `n` times.
///
/// Implementations must be callable from many threads at once.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        (**self).complete(request)
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

fn default_top_k() -> usize {
    10
}
fn default_samples() -> usize {
    crate::emotion::SAMPLES_PER_PROMPT
}
fn default_emotion_tokens() -> usize {
    8
}
fn default_reply_tokens() -> usize {
    128
}
fn default_temperature() -> f64 {
    1.0
}
fn default_timeout() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}
fn default_in_flight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_samples")]
    pub samples_per_prompt: usize,
    #[serde(default = "default_emotion_tokens")]
    pub max_emotion_tokens: usize,
    #[serde(default = "default_reply_tokens")]
    pub max_reply_tokens: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Upper bound on concurrent requests to a remote endpoint.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Only the most recent turns are sent as context; `None` keeps all of them.
    #[serde(default)]
    pub max_history_turns: Option<usize>,
    /// Seed for the mock backend.
    #[serde(default)]
    pub seed: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            top_k: default_top_k(),
            samples_per_prompt: default_samples(),
            max_emotion_tokens: default_emotion_tokens(),
            max_reply_tokens: default_reply_tokens(),
            temperature: default_temperature(),
            timeout_ms: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            max_history_turns: None,
            seed: 0,
        }
    }
}

impl BackendConfig {
    pub fn mock(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    /// Lets the endpoint environment variable override the configured one.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                self.endpoint = Some(endpoint);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.top_k == 0 {
            return invalid("top_k must be at least 1");
        }
        if self.samples_per_prompt == 0 {
            return invalid("samples_per_prompt must be at least 1");
        }
        if self.max_emotion_tokens == 0 || self.max_reply_tokens == 0 {
            return invalid("token limits must be at least 1");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return invalid("temperature must be a non-negative number");
        }
        if self.max_in_flight == 0 {
            return invalid("max_in_flight must be at least 1");
        }
        if self.kind == BackendKind::Remote && self.endpoint.is_none() {
            return invalid("remote backend needs an endpoint");
        }
        Ok(())
    }

    /// Builds the configured backend and wraps it in a [`Classifier`].
    pub fn connect(&self) -> Result<Classifier> {
        self.validate()?;
        let backend: Arc<dyn CompletionBackend> = match self.kind {
            BackendKind::Mock => Arc::new(MockBackend::new(self.seed)),
            BackendKind::Remote => Arc::new(RemoteBackend::new(self)?),
        };
        Classifier::new(backend, self.clone())
    }
}

/// Samples emotions and replies from a backend using the turn format.
#[derive(Clone)]
pub struct Classifier {
    backend: Arc<dyn CompletionBackend>,
    config: BackendConfig,
}

impl std::fmt::Debug for Classifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Classifier")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Classifier {
    pub fn new(backend: Arc<dyn CompletionBackend>, config: BackendConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { backend, config })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn backend(&self) -> &Arc<dyn CompletionBackend> {
        &self.backend
    }

    fn context<'a>(&self, history: &'a [ConversationTurn]) -> &'a [ConversationTurn] {
        match self.config.max_history_turns {
            Some(keep) if history.len() > keep => &history[history.len() - keep..],
            _ => history,
        }
    }

    fn request(&self, prompt: String, max_tokens: usize, n: usize) -> CompletionRequest {
        CompletionRequest {
            prompt,
            max_tokens,
            top_k: self.config.top_k,
            temperature: self.config.temperature,
            stop: vec![END_OF_TEXT.to_string()],
            n,
        }
    }

    /// Draws `samples_per_prompt` emotion labels for `prompt`.
    ///
    /// Out-of-vocabulary generations are dropped and counted, never resampled.
    /// Fails with [`Error::AllSamplesDiscarded`] when nothing valid remains.
    pub fn sample_emotions(&self, history: &[ConversationTurn], prompt: &str) -> Result<EmotionSampleSet> {
        let query = codec::encode_emotion_query(self.context(history), prompt)?;
        let n = self.config.samples_per_prompt;
        let generations = self
            .backend
            .complete(&self.request(query, self.config.max_emotion_tokens, n))?;
        if generations.is_empty() {
            return Err(Error::BackendProtocol("backend returned no generations".into()));
        }
        let set = EmotionSampleSet::from_generations(generations.iter().take(n).map(|g| codec::truncate_generation(g)));
        if set.is_empty() {
            return Err(Error::AllSamplesDiscarded {
                discarded: set.discarded(),
            });
        }
        Ok(set)
    }

    /// One reply conditioned on `emotion`, returned verbatim up to the first
    /// end-of-text marker. An empty generation is not an error.
    pub fn generate_reply(&self, history: &[ConversationTurn], prompt: &str, emotion: Emotion) -> Result<String> {
        let query = codec::encode_reply_query(self.context(history), prompt, emotion)?;
        let generations = self
            .backend
            .complete(&self.request(query, self.config.max_reply_tokens, 1))?;
        Ok(generations
            .first()
            .map(|g| codec::truncate_generation(g).to_string())
            .unwrap_or_default())
    }
}
