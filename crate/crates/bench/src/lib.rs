//! Fixtures shared by the benchmarks.

use emoprofile_core::codec::ConversationTurn;
use emoprofile_core::{
    Emotion, EmotionDistribution, EmotionSampleSet, Polarity, ReferenceProfile, Registry, VOCABULARY_SIZE,
};

/// A full-support distribution whose weights grow with the label index.
pub fn ramp() -> EmotionDistribution {
    let total = (VOCABULARY_SIZE * (VOCABULARY_SIZE + 1) / 2) as f64;
    let w: Vec<f64> = (1..=VOCABULARY_SIZE).map(|i| i as f64 / total).collect();
    EmotionDistribution::from_slice(&w).expect("ramp is on the simplex")
}

/// Ten samples cycling through the vocabulary from `offset`.
pub fn sample_set(offset: usize) -> EmotionSampleSet {
    let samples = (0..10)
        .map(|k| Emotion::from_index((offset + k * 3) % VOCABULARY_SIZE).expect("index is in range"))
        .collect();
    EmotionSampleSet::new(samples, 0)
}

/// `n` completed turns.
pub fn conversation(n: usize) -> Vec<ConversationTurn> {
    (0..n)
        .map(|i| {
            let emotion = Emotion::from_index(i % VOCABULARY_SIZE).expect("index is in range");
            ConversationTurn::complete(
                format!("Turn {i}: I couldn't wait to go to the concert."),
                emotion,
                "What concert was it?",
            )
        })
        .collect()
}

/// Sixteen references alternating positive and negative.
pub fn registry() -> Registry {
    let references = (0..16)
        .map(|i| {
            let polarity = if i % 2 == 0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            let dist =
                EmotionDistribution::mix(&[(ramp(), 1.0), (sample_set(i).distribution().expect("non-empty"), 1.0)])
                    .expect("positive weights");
            ReferenceProfile::new(format!("ref{i}"), polarity, dist)
        })
        .collect();
    Registry::new(references).expect("names are unique")
}
