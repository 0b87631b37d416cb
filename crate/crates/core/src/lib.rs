//! Emotional profiling of conversations and texts.
//!
//! Emotion labels are sampled per prompt from a pluggable completion backend,
//! averaged into a distribution over a fixed 32-label vocabulary, and compared
//! against reference distributions built from text corpora. The nearest
//! references under KL divergence, JS divergence and cosine similarity decide
//! a binary risk label.
//!
//! Screening output is a research signal and not a diagnostic tool.

pub mod backend;
pub mod codec;
pub mod emotion;
mod error;
pub mod eval;
pub mod metrics;
pub mod profile;
pub mod reference;
pub mod registry;
pub mod screening;
pub mod session;

pub use backend::{BackendConfig, BackendKind, Classifier, CompletionBackend, CompletionRequest};
pub use codec::ConversationTurn;
pub use emotion::{
    Emotion, EmotionCounts, EmotionDistribution, EmotionSampleSet, EmotionVocabulary, SAMPLES_PER_PROMPT,
    VOCABULARY_SIZE,
};
pub use error::{Error, Result};
pub use metrics::{cosine_similarity, js_divergence, kl_divergence, DistanceRow, KlDirection, Metric};
pub use profile::{ConversationSession, EmotionalProfile, SessionExport};
pub use reference::{CorpusPost, Polarity, ReferenceProfile};
pub use registry::Registry;
pub use screening::{screen, RiskLabel, ScreeningOptions, ScreeningResult, DISCLAIMER};
pub use session::{SessionStore, TurnResponse};
