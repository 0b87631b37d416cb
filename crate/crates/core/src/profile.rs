//! Conversation sessions and their running emotional profile.
//!
//! The profile is the mean, over classified prompts, of each prompt's
//! normalized sample distribution: every prompt carries the same weight no
//! matter how many of its samples survived vocabulary filtering.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::codec::ConversationTurn;
use crate::emotion::{Emotion, EmotionCounts, EmotionDistribution, EmotionSampleSet, VOCABULARY_SIZE};
use crate::error::{Error, Result};

/// An emotion distribution together with how many prompts (or segments) produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionalProfile {
    pub distribution: EmotionDistribution,
    pub prompt_count: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedTurn {
    pub turn: ConversationTurn,
    pub samples: EmotionSampleSet,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversationSession {
    id: String,
    turns: Vec<RecordedTurn>,
    prompt_count: usize,
    accumulated: [f64; VOCABULARY_SIZE],
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
}

impl ConversationSession {
    pub fn new(id: impl Into<String>) -> Self {
        Self::created_at(id, Utc::now())
    }

    pub fn created_at(id: impl Into<String>, at: DateTime<Utc>) -> Self {
        Self {
            id: id.into(),
            turns: Vec::new(),
            prompt_count: 0,
            accumulated: [0.0; VOCABULARY_SIZE],
            created_at: at,
            updated_at: at,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn turns(&self) -> &[RecordedTurn] {
        &self.turns
    }

    /// Number of turns that contributed to the profile.
    pub fn prompt_count(&self) -> usize {
        self.prompt_count
    }

    pub fn accumulated(&self) -> &[f64; VOCABULARY_SIZE] {
        &self.accumulated
    }

    pub fn created(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn updated(&self) -> DateTime<Utc> {
        self.updated_at
    }

    /// Appends a turn. Turns whose sample set is empty are kept in the
    /// transcript but do not count towards the profile.
    pub fn add_turn(&mut self, turn: ConversationTurn, samples: EmotionSampleSet) {
        self.record(turn, samples, Utc::now());
    }

    pub fn record(&mut self, turn: ConversationTurn, samples: EmotionSampleSet, at: DateTime<Utc>) {
        if let Ok(dist) = samples.distribution() {
            for (acc, w) in self.accumulated.iter_mut().zip(dist.weights()) {
                *acc += w;
            }
            self.prompt_count += 1;
        }
        self.turns.push(RecordedTurn { turn, samples, at });
        self.updated_at = at;
    }

    pub fn profile(&self) -> Result<EmotionalProfile> {
        if self.prompt_count == 0 {
            return Err(Error::EmptySession);
        }
        let scale = self.prompt_count as f64;
        Ok(EmotionalProfile {
            distribution: EmotionDistribution::normalized(self.accumulated.map(|a| a / scale))?,
            prompt_count: self.prompt_count,
            source: self.id.clone(),
        })
    }

    /// All valid samples of the conversation, counted in turn order.
    pub fn cumulative_counts(&self) -> EmotionCounts {
        self.turns
            .iter()
            .flat_map(|t| t.samples.samples().iter().copied())
            .collect()
    }

    /// Conversation-level emotion: argmax over every sample so far, ties going
    /// to the label that appeared first.
    pub fn conversation_emotion(&self) -> Result<Emotion> {
        self.cumulative_counts().argmax().map_err(|_| Error::EmptySession)
    }

    /// The transcript as codec turns, suitable as generation history.
    pub fn history(&self) -> Vec<ConversationTurn> {
        self.turns.iter().map(|t| t.turn.clone()).collect()
    }

    pub fn export(&self) -> SessionExport {
        SessionExport {
            id: self.id.clone(),
            turns: self
                .turns
                .iter()
                .map(|t| TurnExport {
                    prompt: t.turn.prompt.clone(),
                    emotion_samples: t.samples.samples().to_vec(),
                    discarded: t.samples.discarded(),
                    predicted_emotion: t.samples.argmax().ok(),
                    response: t.turn.response.clone(),
                })
                .collect(),
            profile: self.profile().ok().map(|p| p.distribution),
            prompt_count: self.prompt_count,
        }
    }
}

/// Recomputes a profile from raw sample sets, independently of the running sum.
pub fn batch_profile<'a, I>(sample_sets: I) -> Result<EmotionDistribution>
where
    I: IntoIterator<Item = &'a EmotionSampleSet>,
{
    let dists: Vec<_> = sample_sets
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.distribution().map(|d| (d, 1.0)))
        .collect::<Result<_>>()?;
    if dists.is_empty() {
        return Err(Error::EmptySession);
    }
    EmotionDistribution::mix(&dists)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnExport {
    pub prompt: String,
    pub emotion_samples: Vec<Emotion>,
    pub discarded: usize,
    pub predicted_emotion: Option<Emotion>,
    pub response: Option<String>,
}

/// JSON shape of an exported session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub id: String,
    pub turns: Vec<TurnExport>,
    pub profile: Option<EmotionDistribution>,
    pub prompt_count: usize,
}
