//! The fixed 32-label emotion vocabulary and simplex-valued distributions over it.
//!
//! Labels are kept in alphabetical order, which doubles as the canonical
//! serialization order and as the last-resort tie-break order.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of distinct emotion labels.
pub const VOCABULARY_SIZE: usize = 32;

/// Default number of independent emotion generations per prompt.
pub const SAMPLES_PER_PROMPT: usize = 10;

/// Tolerance on `Σ weights = 1` when a distribution is constructed from outside data.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

const LABELS: [&str; VOCABULARY_SIZE] = [
    "afraid",
    "angry",
    "annoyed",
    "anticipating",
    "anxious",
    "apprehensive",
    "ashamed",
    "caring",
    "confident",
    "content",
    "devastated",
    "disappointed",
    "disgusted",
    "embarrassed",
    "excited",
    "faithful",
    "furious",
    "grateful",
    "guilty",
    "hopeful",
    "impressed",
    "jealous",
    "joyful",
    "lonely",
    "nostalgic",
    "prepared",
    "proud",
    "sad",
    "sentimental",
    "surprised",
    "terrified",
    "trusting",
];

// Commonly-considered pleasant emotions; the other 16 are the unpleasant half.
const PLEASANT: [&str; 16] = [
    "anticipating",
    "caring",
    "confident",
    "content",
    "excited",
    "faithful",
    "grateful",
    "hopeful",
    "impressed",
    "joyful",
    "nostalgic",
    "prepared",
    "proud",
    "sentimental",
    "surprised",
    "trusting",
];

/// One label of the vocabulary, stored as its canonical index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Emotion(u8);

impl Emotion {
    pub fn from_index(index: usize) -> Option<Self> {
        (index < VOCABULARY_SIZE).then_some(Emotion(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        LABELS[self.index()]
    }

    /// All emotions in canonical order.
    pub fn all() -> impl DoubleEndedIterator<Item = Emotion> + ExactSizeIterator {
        (0..VOCABULARY_SIZE as u8).map(Emotion)
    }

    /// Whether the emotion belongs to the pleasant half of the valence partition.
    pub fn is_pleasant(self) -> bool {
        PLEASANT.contains(&self.label())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LABELS
            .binary_search(&s)
            .map(|i| Emotion(i as u8))
            .map_err(|_| Error::UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Debug for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Emotion({})", self.label())
    }
}

impl Serialize for Emotion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Emotion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// The canonical vocabulary. Serializes as a JSON array of the 32 labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmotionVocabulary;

impl EmotionVocabulary {
    pub fn labels(&self) -> &'static [&'static str; VOCABULARY_SIZE] {
        &LABELS
    }

    pub fn lookup(&self, label: &str) -> Result<Emotion> {
        label.parse()
    }

    pub fn len(&self) -> usize {
        VOCABULARY_SIZE
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Serialize for EmotionVocabulary {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(VOCABULARY_SIZE))?;
        for label in LABELS {
            seq.serialize_element(label)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for EmotionVocabulary {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<String>::deserialize(deserializer)?;
        if labels.len() != VOCABULARY_SIZE || labels.iter().zip(LABELS).any(|(a, b)| a != b) {
            return Err(de::Error::custom(
                "vocabulary must list the 32 canonical labels in alphabetical order",
            ));
        }
        Ok(EmotionVocabulary)
    }
}

/// A probability vector over the vocabulary.
#[derive(Clone, Copy, PartialEq)]
pub struct EmotionDistribution {
    weights: [f64; VOCABULARY_SIZE],
}

impl EmotionDistribution {
    /// Validates externally supplied weights: finite, non-negative, summing to 1
    /// within [`SIMPLEX_TOLERANCE`]. Weights are stored as given.
    pub fn from_weights(weights: [f64; VOCABULARY_SIZE]) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {i} ({}) is {w}", LABELS[i])));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn from_slice(weights: &[f64]) -> Result<Self> {
        let weights: [f64; VOCABULARY_SIZE] = weights.try_into().map_err(|_| {
            Error::InvalidDistribution(format!("expected {VOCABULARY_SIZE} weights, got {}", weights.len()))
        })?;
        Self::from_weights(weights)
    }

    /// Scales a non-negative vector onto the simplex.
    pub(crate) fn normalized(raw: [f64; VOCABULARY_SIZE]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::AllZeroCounts);
        }
        Ok(Self {
            weights: raw.map(|w| w / total),
        })
    }

    /// `weights[i] = counts[i] / Σ counts`. Repeated labels accumulate.
    pub fn from_counts<I>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Emotion, u64)>,
    {
        let mut raw = [0.0; VOCABULARY_SIZE];
        for (emotion, count) in counts {
            raw[emotion.index()] += count as f64;
        }
        Self::normalized(raw)
    }

    /// Like [`from_counts`](Self::from_counts) but keyed by label strings.
    pub fn from_named_counts<'a, I>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let parsed = counts
            .into_iter()
            .map(|(label, n)| Ok((label.parse::<Emotion>()?, n)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_counts(parsed)
    }

    pub fn uniform() -> Self {
        Self {
            weights: [1.0 / VOCABULARY_SIZE as f64; VOCABULARY_SIZE],
        }
    }

    pub fn delta(emotion: Emotion) -> Self {
        let mut weights = [0.0; VOCABULARY_SIZE];
        weights[emotion.index()] = 1.0;
        Self { weights }
    }

    /// Convex combination of `parts` after normalizing their weights.
    pub fn mix(parts: &[(EmotionDistribution, f64)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some((_, w)) = parts.iter().find(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "mixing weight {w} is not a non-negative finite number"
            )));
        }
        let total: f64 = parts.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::AllZeroWeights);
        }
        let mut raw = [0.0; VOCABULARY_SIZE];
        for (dist, w) in parts {
            let share = w / total;
            for (acc, p) in raw.iter_mut().zip(dist.weights) {
                *acc += share * p;
            }
        }
        Self::normalized(raw)
    }

    pub fn weight(&self, emotion: Emotion) -> f64 {
        self.weights[emotion.index()]
    }

    pub fn weights(&self) -> &[f64; VOCABULARY_SIZE] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (Emotion, f64)> + '_ {
        Emotion::all().zip(self.weights.iter().copied())
    }

    /// The `n` heaviest emotions, heaviest first; equal weights keep canonical order.
    pub fn top(&self, n: usize) -> Vec<(Emotion, f64)> {
        let mut entries: Vec<_> = self.iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        entries.truncate(n);
        entries
    }

    /// Pleasant emotions first, then unpleasant ones, each half sorted by
    /// descending weight.
    pub fn valence_sorted(&self) -> Vec<(Emotion, f64)> {
        let mut entries: Vec<_> = self.iter().collect();
        entries.sort_by(|a, b| {
            b.0.is_pleasant()
                .cmp(&a.0.is_pleasant())
                .then_with(|| b.1.total_cmp(&a.1))
        });
        entries
    }
}

impl fmt::Debug for EmotionDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.iter().filter(|(_, w)| *w > 0.0).map(|(e, w)| (e.label(), w)))
            .finish()
    }
}

impl Serialize for EmotionDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(VOCABULARY_SIZE))?;
        for w in &self.weights {
            seq.serialize_element(w)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for EmotionDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct WeightsVisitor;

        impl<'de> Visitor<'de> for WeightsVisitor {
            type Value = EmotionDistribution;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "an array of {VOCABULARY_SIZE} probabilities")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut weights = Vec::with_capacity(VOCABULARY_SIZE);
                while let Some(w) = seq.next_element::<f64>()? {
                    weights.push(w);
                }
                EmotionDistribution::from_slice(&weights).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_seq(WeightsVisitor)
    }
}

/// Emotion counts that remember the order in which each label first appeared.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmotionCounts {
    counts: IndexMap<Emotion, u64>,
}

impl EmotionCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, emotion: Emotion) {
        self.add(emotion, 1);
    }

    pub fn add(&mut self, emotion: Emotion, n: u64) {
        *self.counts.entry(emotion).or_insert(0) += n;
    }

    /// Merges `other` after `self`, so labels first seen in `other` rank later on ties.
    pub fn merge(&mut self, other: &EmotionCounts) {
        for (&e, &n) in &other.counts {
            self.add(e, n);
        }
    }

    pub fn get(&self, emotion: Emotion) -> u64 {
        self.counts.get(&emotion).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Entries in first-occurrence order.
    pub fn iter(&self) -> impl Iterator<Item = (Emotion, u64)> + '_ {
        self.counts.iter().map(|(&e, &n)| (e, n))
    }

    /// Highest count, ties resolved in favour of the label inserted first.
    pub fn argmax(&self) -> Result<Emotion> {
        let mut best: Option<(Emotion, u64)> = None;
        for (e, n) in self.iter() {
            if n > 0 && best.is_none_or(|(_, m)| n > m) {
                best = Some((e, n));
            }
        }
        best.map(|(e, _)| e).ok_or(Error::EmptySampleSet)
    }

    pub fn to_distribution(&self) -> Result<EmotionDistribution> {
        EmotionDistribution::from_counts(self.iter())
    }
}

impl FromIterator<Emotion> for EmotionCounts {
    fn from_iter<T: IntoIterator<Item = Emotion>>(iter: T) -> Self {
        let mut counts = EmotionCounts::new();
        for e in iter {
            counts.push(e);
        }
        counts
    }
}

impl Serialize for EmotionCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.counts.len()))?;
        for (e, n) in self.iter() {
            map.serialize_entry(e.label(), &n)?;
        }
        map.end()
    }
}

/// The emotion with the highest count in an ordered sample list; ties go to
/// the label whose first occurrence comes earliest.
pub fn argmax_emotion<I>(samples: I) -> Result<Emotion>
where
    I: IntoIterator<Item = Emotion>,
{
    samples.into_iter().collect::<EmotionCounts>().argmax()
}

/// The emotions drawn for a single prompt, in sampling order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionSampleSet {
    samples: Vec<Emotion>,
    discarded: usize,
}

impl EmotionSampleSet {
    pub fn new(samples: Vec<Emotion>, discarded: usize) -> Self {
        Self { samples, discarded }
    }

    /// Parses raw generations. Each is trimmed and lowercased; anything outside
    /// the vocabulary is counted as discarded rather than resampled.
    pub fn from_generations<I, S>(generations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = Self::default();
        for g in generations {
            match g.as_ref().trim().to_lowercase().parse::<Emotion>() {
                Ok(e) => set.samples.push(e),
                Err(_) => set.discarded += 1,
            }
        }
        set
    }

    pub fn samples(&self) -> &[Emotion] {
        &self.samples
    }

    pub fn discarded(&self) -> usize {
        self.discarded
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn counts(&self) -> EmotionCounts {
        self.samples.iter().copied().collect()
    }

    /// Sample frequencies normalized by the number of valid samples.
    pub fn distribution(&self) -> Result<EmotionDistribution> {
        if self.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        self.counts().to_distribution()
    }

    pub fn argmax(&self) -> Result<Emotion> {
        argmax_emotion(self.samples.iter().copied())
    }
}
