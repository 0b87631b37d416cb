//! Emotion-classification evaluation over empathetic-dialogue style data.
//!
//! Only speaker utterances are classified. History is built from the
//! per-prompt prediction and the gold listener reply, so errors in generated
//! replies never leak into later prompts.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Classifier;
use crate::codec::ConversationTurn;
use crate::emotion::{Emotion, EmotionSampleSet};
use crate::error::{Error, Result};
use crate::profile::ConversationSession;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Speaker,
    Listener,
}

impl Role {
    fn parse(raw: &str) -> Option<Role> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "speaker" | "prompter" | "user" => Some(Role::Speaker),
            "listener" | "assistant" => Some(Role::Listener),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub role: Role,
    pub text: String,
}

/// A conversation with its single gold context emotion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub gold: Emotion,
    pub utterances: Vec<Utterance>,
}

#[derive(Deserialize)]
struct RawUtterance {
    #[serde(alias = "conv_id")]
    conversation_id: String,
    utterance_idx: usize,
    #[serde(default, alias = "speaker")]
    speaker_role: Option<String>,
    #[serde(alias = "utterance")]
    text: String,
    #[serde(alias = "context", alias = "emotion")]
    context_emotion: String,
}

/// Restores the commas the original corpus escapes as `_comma_`.
fn unescape(text: &str) -> String {
    text.replace("_comma_", ",")
}

fn group(rows: Vec<(usize, RawUtterance)>) -> Result<Vec<Dialogue>> {
    let mut by_id: IndexMap<String, Vec<(usize, RawUtterance)>> = IndexMap::new();
    for (line, row) in rows {
        by_id.entry(row.conversation_id.clone()).or_default().push((line, row));
    }
    by_id
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|(_, r)| r.utterance_idx);
            let gold_raw = rows[0].1.context_emotion.trim().to_ascii_lowercase();
            let gold = gold_raw.parse().map_err(|_| {
                Error::MalformedDataset(format!("conversation `{id}` has unknown emotion `{gold_raw}`"))
            })?;
            if let Some((line, _)) = rows
                .iter()
                .find(|(_, r)| r.context_emotion.trim().to_ascii_lowercase() != gold_raw)
            {
                return Err(Error::MalformedDataset(format!(
                    "record {line}: conversation `{id}` changes its context emotion"
                )));
            }
            let utterances = rows
                .into_iter()
                .map(|(line, r)| {
                    let role = match &r.speaker_role {
                        Some(raw) => Role::parse(raw).ok_or_else(|| {
                            Error::MalformedDataset(format!("record {line}: unknown speaker role `{raw}`"))
                        })?,
                        // the speaker opens every conversation and turns alternate
                        None if r.utterance_idx % 2 == 1 => Role::Speaker,
                        None => Role::Listener,
                    };
                    Ok(Utterance {
                        role,
                        text: unescape(&r.text),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(Dialogue { id, gold, utterances })
        })
        .collect()
}

/// Reads dialogues from CSV with columns `conversation_id` (or `conv_id`),
/// `utterance_idx`, optional `speaker_role`, `text` (or `utterance`) and
/// `context_emotion` (or `context`).
pub fn read_dialogues_csv<R: std::io::Read>(reader: R) -> Result<Vec<Dialogue>> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let rows = csv
        .deserialize::<RawUtterance>()
        .enumerate()
        .map(|(i, r)| {
            r.map(|r| (i + 2, r))
                .map_err(|e| Error::MalformedDataset(e.to_string()))
        })
        .collect::<Result<_>>()?;
    group(rows)
}

/// Reads dialogues from JSON Lines, one utterance object per line.
pub fn read_dialogues_jsonl<R: BufRead>(reader: R) -> Result<Vec<Dialogue>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::MalformedDataset(format!("line {}: {e}", i + 1)))?;
        rows.push((i + 1, row));
    }
    group(rows)
}

pub fn read_dialogues(path: &Path) -> Result<Vec<Dialogue>> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_dialogues_csv(file)
    } else {
        read_dialogues_jsonl(std::io::BufReader::new(file))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class scores with macro and support-weighted averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Every label seen as gold or prediction, in vocabulary order.
    pub classes: IndexMap<String, ClassScores>,
    pub accuracy: f64,
    pub macro_avg: ClassScores,
    pub weighted_avg: ClassScores,
    pub total: usize,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl ClassificationReport {
    /// Builds the report from `(gold, predicted)` pairs.
    pub fn from_pairs(pairs: &[(Emotion, Emotion)]) -> Self {
        let mut classes = IndexMap::new();
        for e in Emotion::all() {
            let tp = pairs.iter().filter(|(g, p)| *g == e && *p == e).count();
            let support = pairs.iter().filter(|(g, _)| *g == e).count();
            let predicted = pairs.iter().filter(|(_, p)| *p == e).count();
            if support == 0 && predicted == 0 {
                continue;
            }
            let precision = if predicted == 0 {
                0.0
            } else {
                tp as f64 / predicted as f64
            };
            let recall = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
            classes.insert(
                e.label().to_string(),
                ClassScores {
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support,
                },
            );
        }
        let total = pairs.len();
        let n = classes.len().max(1) as f64;
        let mean = |f: fn(&ClassScores) -> f64| classes.values().map(f).sum::<f64>() / n;
        let weighted = |f: fn(&ClassScores) -> f64| {
            if total == 0 {
                0.0
            } else {
                classes.values().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
            }
        };
        let correct = pairs.iter().filter(|(g, p)| g == p).count();
        Self {
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            macro_avg: ClassScores {
                precision: mean(|c| c.precision),
                recall: mean(|c| c.recall),
                f1: mean(|c| c.f1),
                support: total,
            },
            weighted_avg: ClassScores {
                precision: weighted(|c| c.precision),
                recall: weighted(|c| c.recall),
                f1: weighted(|c| c.f1),
                support: total,
            },
            classes,
            total,
        }
    }

    /// Aligned text table: `precision recall f1-score support` per class.
    pub fn render(&self) -> String {
        let width = self
            .classes
            .keys()
            .map(String::len)
            .chain(["weighted avg".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>width$} {:>9} {:>9} {:>9} {:>9}",
            "", "precision", "recall", "f1-score", "support"
        );
        let row = |out: &mut String, name: &str, c: &ClassScores| {
            let _ = writeln!(
                out,
                "{name:>width$} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                c.precision, c.recall, c.f1, c.support
            );
        };
        for (name, c) in &self.classes {
            row(&mut out, name, c);
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:>width$} {:>9} {:>9} {:>9.2} {:>9}",
            "accuracy", "", "", self.accuracy, self.total
        );
        row(&mut out, "macro avg", &self.macro_avg);
        row(&mut out, "weighted avg", &self.weighted_avg);
        out
    }
}

/// Predictions for one speaker prompt; `predicted` is `None` when every
/// sampled emotion was out of vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPrediction {
    pub prompt: String,
    pub samples: EmotionSampleSet,
    pub predicted: Option<Emotion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueOutcome {
    pub id: String,
    pub gold: Emotion,
    pub prompts: Vec<PromptPrediction>,
    pub conversation: Option<Emotion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEvalReport {
    pub prompt_level: ClassificationReport,
    pub conversation_level: ClassificationReport,
    pub skipped_prompts: usize,
    pub skipped_conversations: usize,
    pub dialogues: Vec<DialogueOutcome>,
}

impl EmotionEvalReport {
    pub fn render(&self) -> String {
        format!(
            "{}\n\nprompt level ({} prompts, {} skipped)\n{}\nconversation level ({} conversations, {} skipped)\n{}",
            crate::screening::DISCLAIMER,
            self.prompt_level.total,
            self.skipped_prompts,
            self.prompt_level.render(),
            self.conversation_level.total,
            self.skipped_conversations,
            self.conversation_level.render()
        )
    }
}

/// Classifies every speaker prompt of one dialogue.
pub fn classify_dialogue(dialogue: &Dialogue, classifier: &Classifier) -> Result<DialogueOutcome> {
    let mut session = ConversationSession::new(dialogue.id.clone());
    let mut history: Vec<ConversationTurn> = Vec::new();
    let mut prompts = Vec::new();
    let mut pending: Option<ConversationTurn> = None;
    for u in &dialogue.utterances {
        match u.role {
            Role::Speaker => {
                if let Some(mut turn) = pending.take() {
                    turn.response = Some(String::new());
                    history.push(turn);
                }
                let samples = match classifier.sample_emotions(&history, &u.text) {
                    Ok(s) => s,
                    Err(Error::AllSamplesDiscarded { discarded }) => EmotionSampleSet::new(Vec::new(), discarded),
                    Err(e) => return Err(e),
                };
                let predicted = samples.argmax().ok();
                if let Some(emotion) = predicted {
                    let mut turn = ConversationTurn::new(u.text.clone());
                    turn.emotion = Some(emotion.label().to_string());
                    pending = Some(turn.clone());
                    session.add_turn(turn, samples.clone());
                }
                prompts.push(PromptPrediction {
                    prompt: u.text.clone(),
                    samples,
                    predicted,
                });
            }
            Role::Listener => {
                if let Some(mut turn) = pending.take() {
                    turn.response = Some(u.text.clone());
                    history.push(turn);
                }
            }
        }
    }
    Ok(DialogueOutcome {
        id: dialogue.id.clone(),
        gold: dialogue.gold,
        prompts,
        conversation: session.conversation_emotion().ok(),
    })
}

/// Prompt-level and conversation-level reports over a dialogue set.
pub fn evaluate_emotion_classification(dialogues: &[Dialogue], classifier: &Classifier) -> Result<EmotionEvalReport> {
    if dialogues.is_empty() {
        return Err(Error::MalformedDataset("no dialogues".into()));
    }
    let outcomes = dialogues
        .par_iter()
        .map(|d| classify_dialogue(d, classifier))
        .collect::<Result<Vec<_>>>()?;
    let mut prompt_pairs = Vec::new();
    let mut conversation_pairs = Vec::new();
    let mut skipped_prompts = 0;
    for o in &outcomes {
        for p in &o.prompts {
            match p.predicted {
                Some(pred) => prompt_pairs.push((o.gold, pred)),
                None => skipped_prompts += 1,
            }
        }
        if let Some(pred) = o.conversation {
            conversation_pairs.push((o.gold, pred));
        }
    }
    Ok(EmotionEvalReport {
        prompt_level: ClassificationReport::from_pairs(&prompt_pairs),
        conversation_level: ClassificationReport::from_pairs(&conversation_pairs),
        skipped_prompts,
        skipped_conversations: outcomes.len() - conversation_pairs.len(),
        dialogues: outcomes,
    })
}
