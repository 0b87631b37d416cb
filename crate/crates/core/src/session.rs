//! Live sessions: the per-turn pipeline and a concurrent session store with
//! an append-only event log per session.
//!
//! A turn is computed against a private copy of the session and committed
//! only after every step succeeded (and, with a log, after its event hit the
//! file), so a failing backend leaves the stored session untouched.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::backend::{Classifier, MOCK_FALLBACK_EMOTION};
use crate::codec::{self, ConversationTurn};
use crate::emotion::{Emotion, EmotionDistribution, EmotionSampleSet};
use crate::error::{Error, Result};
use crate::profile::ConversationSession;
use crate::registry::Registry;
use crate::screening::{screen, ScreeningOptions, ScreeningResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub turn_index: usize,
    /// Conversation-level emotion over every sample so far.
    pub predicted_emotion: Option<Emotion>,
    /// Emotion the reply was conditioned on.
    pub turn_emotion: Emotion,
    pub emotion_samples: Vec<Emotion>,
    pub discarded: usize,
    pub reply: String,
    pub profile: Option<EmotionDistribution>,
    pub screening: Option<ScreeningResult>,
}

/// Screening of the session profile, or `None` while it cannot be computed.
pub fn screen_session(
    session: &ConversationSession,
    registry: &Registry,
    options: &ScreeningOptions,
) -> Option<ScreeningResult> {
    let profile = session.profile().ok()?;
    match screen(&profile.distribution, registry, options) {
        Ok(result) => Some(result),
        Err(e) => {
            log::debug!("session {} not screened: {e}", session.id());
            None
        }
    }
}

/// Runs one turn on `session` in place. On error `session` is unchanged.
///
/// The reply is conditioned on the turn's own most frequent emotion. A turn
/// whose samples were all discarded falls back to the conversation-level
/// emotion, then to the neutral fallback label.
pub fn run_turn(
    session: &mut ConversationSession,
    text: &str,
    classifier: &Classifier,
    registry: &Registry,
    options: &ScreeningOptions,
) -> Result<TurnResponse> {
    let (turn, samples, at) = compute_turn(session, text, classifier)?;
    session.record(turn, samples, at);
    Ok(respond(session, registry, options))
}

fn compute_turn(
    session: &ConversationSession,
    text: &str,
    classifier: &Classifier,
) -> Result<(ConversationTurn, EmotionSampleSet, DateTime<Utc>)> {
    let prompt = text.trim();
    if prompt.is_empty() {
        return Err(Error::EmptyPrompt);
    }
    codec::check_text(prompt)?;
    let history = session.history();
    let samples = match classifier.sample_emotions(&history, prompt) {
        Ok(s) => s,
        Err(Error::AllSamplesDiscarded { discarded }) => EmotionSampleSet::new(Vec::new(), discarded),
        Err(e) => return Err(e),
    };
    let emotion = samples
        .argmax()
        .or_else(|_| session.conversation_emotion())
        .unwrap_or_else(|_| MOCK_FALLBACK_EMOTION.parse().expect("fallback is in the vocabulary"));
    let reply = classifier.generate_reply(&history, prompt, emotion)?;
    Ok((ConversationTurn::complete(prompt, emotion, reply), samples, Utc::now()))
}

fn respond(session: &ConversationSession, registry: &Registry, options: &ScreeningOptions) -> TurnResponse {
    let last = session.turns().last().expect("a turn was just recorded");
    TurnResponse {
        turn_index: session.turns().len() - 1,
        predicted_emotion: session.conversation_emotion().ok(),
        turn_emotion: last
            .turn
            .emotion_label()
            .ok()
            .flatten()
            .expect("recorded turns carry a vocabulary emotion"),
        emotion_samples: last.samples.samples().to_vec(),
        discarded: last.samples.discarded(),
        reply: last.turn.response.clone().unwrap_or_default(),
        profile: session.profile().ok().map(|p| p.distribution),
        screening: screen_session(session, registry, options),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum Event {
    Created {
        id: String,
        at: DateTime<Utc>,
    },
    Turn {
        turn: ConversationTurn,
        samples: EmotionSampleSet,
        at: DateTime<Utc>,
    },
}

struct Slot {
    /// Held for the whole duration of a turn: one writer per session.
    writer: Mutex<Option<std::fs::File>>,
    snapshot: RwLock<Arc<ConversationSession>>,
}

/// Concurrent sessions keyed by id. Readers always see the last committed turn.
#[derive(Default)]
pub struct SessionStore {
    slots: RwLock<HashMap<String, Arc<Slot>>>,
    log_dir: Option<PathBuf>,
}

fn append(file: &mut Option<std::fs::File>, event: &Event) -> Result<()> {
    if let Some(file) = file {
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
    }
    Ok(())
}

fn replay(path: &Path) -> Result<Option<ConversationSession>> {
    let mut session: Option<ConversationSession> = None;
    for line in BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        let Ok(event) = serde_json::from_str::<Event>(&line) else {
            log::warn!("{}: ignoring unreadable event", path.display());
            continue;
        };
        match (event, session.as_mut()) {
            (Event::Created { id, at }, None) => session = Some(ConversationSession::created_at(id, at)),
            (Event::Turn { turn, samples, at }, Some(s)) => s.record(turn, samples, at),
            _ => log::warn!("{}: ignoring out-of-order event", path.display()),
        }
    }
    Ok(session)
}

impl SessionStore {
    /// An in-memory store.
    pub fn new() -> Self {
        Self::default()
    }

    /// A store logging to `dir`, with every session found there replayed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut slots = HashMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "jsonl") {
                continue;
            }
            if let Some(session) = replay(&path)? {
                let file = std::fs::OpenOptions::new().append(true).open(&path)?;
                slots.insert(
                    session.id().to_string(),
                    Arc::new(Slot {
                        writer: Mutex::new(Some(file)),
                        snapshot: RwLock::new(Arc::new(session)),
                    }),
                );
            }
        }
        Ok(Self {
            slots: RwLock::new(slots),
            log_dir: Some(dir),
        })
    }

    pub fn create(&self) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.create_with_id(&id)?;
        Ok(id)
    }

    /// Creates a session with a caller-chosen id, which must be unused and
    /// consist of letters, digits, `-` or `_`.
    pub fn create_with_id(&self, id: &str) -> Result<()> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::InvalidConfig(format!("invalid session id `{id}`")));
        }
        let mut slots = self.slots.write();
        if slots.contains_key(id) {
            return Err(Error::InvalidConfig(format!("session `{id}` already exists")));
        }
        let session = ConversationSession::new(id);
        let mut file = match &self.log_dir {
            Some(dir) => Some(
                std::fs::OpenOptions::new()
                    .create_new(true)
                    .append(true)
                    .open(dir.join(format!("{id}.jsonl")))?,
            ),
            None => None,
        };
        append(
            &mut file,
            &Event::Created {
                id: id.to_string(),
                at: session.created(),
            },
        )?;
        slots.insert(
            id.to_string(),
            Arc::new(Slot {
                writer: Mutex::new(file),
                snapshot: RwLock::new(Arc::new(session)),
            }),
        );
        Ok(())
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.slots
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    /// The last committed state of a session.
    pub fn get(&self, id: &str) -> Result<Arc<ConversationSession>> {
        Ok(self.slot(id)?.snapshot.read().clone())
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self.slots.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn len(&self) -> usize {
        self.slots.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.read().is_empty()
    }

    /// Runs and commits one turn. Turns on the same session are serialized;
    /// other sessions proceed in parallel.
    pub fn run_turn(
        &self,
        id: &str,
        text: &str,
        classifier: &Classifier,
        registry: &Registry,
        options: &ScreeningOptions,
    ) -> Result<TurnResponse> {
        let slot = self.slot(id)?;
        let mut writer = slot.writer.lock();
        let current = slot.snapshot.read().clone();
        let (turn, samples, at) = compute_turn(&current, text, classifier)?;
        append(
            &mut writer,
            &Event::Turn {
                turn: turn.clone(),
                samples: samples.clone(),
                at,
            },
        )?;
        let mut next = (*current).clone();
        next.record(turn, samples, at);
        let response = respond(&next, registry, options);
        *slot.snapshot.write() = Arc::new(next);
        Ok(response)
    }
}
