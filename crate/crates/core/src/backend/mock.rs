//! Deterministic keyword-lexicon backend for offline runs and tests.
//!
//! Emotion queries are answered by matching the last prompt against a fixed
//! keyword table (case-insensitive, leftmost-longest, whole words). The label
//! covering the most matched characters is emitted with probability 0.8; the
//! remaining 0.2 goes to a uniformly drawn alternative, taken from the other
//! matched labels when there are any and from the rest of the vocabulary
//! otherwise. Prompts without a match fall back to `content`.
//!
//! Reply queries get the template `That sounds {emotion}. Tell me more.`
//!
//! The random stream is seeded from `(seed, prompt)`, so the output is a pure
//! function of the prompt text and the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{CompletionBackend, CompletionRequest};
use crate::codec;
use crate::emotion::{Emotion, VOCABULARY_SIZE};
use crate::error::{Error, Result};

pub const MOCK_FALLBACK_EMOTION: &str = "content";

const PRIMARY_PROBABILITY: f64 = 0.8;

const KEYWORDS: &[(&str, &[&str])] = &[
    ("afraid", &["afraid", "scared", "frightened", "fear"]),
    ("angry", &["angry", "mad at", "pissed", "outraged"]),
    ("annoyed", &["annoyed", "irritated", "irritating", "bugging me"]),
    (
        "anticipating",
        &[
            "anticipating",
            "couldn't wait",
            "can't wait",
            "looking forward",
            "upcoming",
        ],
    ),
    ("anxious", &["anxious", "anxiety", "nervous", "worried", "panic"]),
    ("apprehensive", &["apprehensive", "uneasy", "hesitant", "unsure about"]),
    ("ashamed", &["ashamed", "shame", "humiliated"]),
    ("caring", &["caring", "take care of", "looked after", "care for"]),
    ("confident", &["confident", "self-assured", "believe in myself"]),
    ("content", &["content", "satisfied", "relaxed", "peaceful"]),
    ("devastated", &["devastated", "heartbroken", "crushed", "hopeless"]),
    ("disappointed", &["disappointed", "let down", "bummer"]),
    ("disgusted", &["disgusted", "disgusting", "gross", "revolting"]),
    ("embarrassed", &["embarrassed", "embarrassing", "awkward", "blushed"]),
    ("excited", &["excited", "thrilled", "pumped", "!!!"]),
    ("faithful", &["faithful", "loyal", "devoted"]),
    ("furious", &["furious", "livid", "enraged", "rage"]),
    ("grateful", &["grateful", "thankful", "thanks", "appreciate"]),
    ("guilty", &["guilty", "my fault", "regret"]),
    ("hopeful", &["hopeful", "hope", "hoping", "fingers crossed"]),
    ("impressed", &["impressed", "amazing", "incredible"]),
    ("jealous", &["jealous", "envious", "envy"]),
    ("joyful", &["joyful", "happy", "joy", "delighted"]),
    ("lonely", &["lonely", "alone", "isolated", "no friends"]),
    (
        "nostalgic",
        &["nostalgic", "remember when", "childhood", "good old days"],
    ),
    ("prepared", &["prepared", "ready for", "planned", "packed"]),
    ("proud", &["proud", "accomplished", "achievement"]),
    ("sad", &["sad", "unhappy", "crying", "tears", "miserable"]),
    ("sentimental", &["sentimental", "keepsake", "memories"]),
    ("surprised", &["surprised", "shocked", "unexpected", "out of nowhere"]),
    (
        "terrified",
        &["terrified", "bugs", "horrified", "petrified", "nightmare"],
    ),
    ("trusting", &["trusting", "trust", "rely on", "count on"]),
];

/// Keyword → emotion table.
#[derive(Debug, Clone)]
pub struct Lexicon {
    // longest keywords first so the first hit at a position is the longest one
    entries: Vec<(String, Emotion)>,
}

/// What the lexicon concluded about a text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconVerdict {
    pub primary: Emotion,
    /// Other matched labels, in order of first match.
    pub alternatives: Vec<Emotion>,
    pub matched: bool,
}

impl Default for Lexicon {
    fn default() -> Self {
        let pairs = KEYWORDS.iter().flat_map(|(label, words)| {
            let emotion: Emotion = label.parse().expect("lexicon labels are in the vocabulary");
            words.iter().map(move |w| (w.to_string(), emotion))
        });
        Self::from_pairs(pairs)
    }
}

impl Lexicon {
    pub fn from_pairs<I: IntoIterator<Item = (String, Emotion)>>(pairs: I) -> Self {
        let mut entries: Vec<_> = pairs
            .into_iter()
            .map(|(k, e)| (k.to_lowercase(), e))
            .filter(|(k, _)| !k.is_empty())
            .collect();
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Self { entries }
    }

    pub fn keywords(&self, emotion: Emotion) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(_, e)| *e == emotion)
            .map(|(k, _)| k.as_str())
    }

    /// Non-overlapping keyword hits as `(byte offset, keyword length, emotion)`,
    /// offsets referring to the lowercased text.
    pub fn matches(&self, text: &str) -> Vec<(usize, usize, Emotion)> {
        let lower = text.to_lowercase();
        let mut hits = Vec::new();
        let mut pos = 0;
        while pos < lower.len() {
            let rest = &lower[pos..];
            let hit = self.entries.iter().find(|(kw, _)| {
                rest.starts_with(kw.as_str())
                    && boundary_before(&lower, pos, kw)
                    && boundary_after(&lower, pos + kw.len(), kw)
            });
            match hit {
                Some((kw, emotion)) => {
                    hits.push((pos, kw.len(), *emotion));
                    pos += kw.len();
                }
                None => pos += rest.chars().next().map_or(1, char::len_utf8),
            }
        }
        hits
    }

    pub fn classify(&self, text: &str) -> LexiconVerdict {
        let mut coverage: Vec<(Emotion, usize)> = Vec::new();
        for (_, len, emotion) in self.matches(text) {
            match coverage.iter_mut().find(|(e, _)| *e == emotion) {
                Some((_, total)) => *total += len,
                None => coverage.push((emotion, len)),
            }
        }
        let Some(&(primary, _)) = coverage.iter().reduce(|best, c| if c.1 > best.1 { c } else { best }) else {
            return LexiconVerdict {
                primary: MOCK_FALLBACK_EMOTION.parse().expect("fallback is in the vocabulary"),
                alternatives: Vec::new(),
                matched: false,
            };
        };
        LexiconVerdict {
            primary,
            alternatives: coverage.iter().map(|(e, _)| *e).filter(|e| *e != primary).collect(),
            matched: true,
        }
    }
}

fn boundary_before(text: &str, pos: usize, keyword: &str) -> bool {
    if !keyword.starts_with(|c: char| c.is_alphanumeric()) {
        return true;
    }
    text[..pos].chars().next_back().is_none_or(|c| !c.is_alphanumeric())
}

fn boundary_after(text: &str, end: usize, keyword: &str) -> bool {
    if !keyword.ends_with(|c: char| c.is_alphanumeric()) {
        return true;
    }
    text[end..].chars().next().is_none_or(|c| !c.is_alphanumeric())
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    lexicon: Lexicon,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self::with_lexicon(seed, Lexicon::default())
    }

    pub fn with_lexicon(seed: u64, lexicon: Lexicon) -> Self {
        Self { seed, lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    fn rng_for(&self, text: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    /// The `n` emotion labels the mock draws for `text`.
    pub fn sample(&self, text: &str, n: usize) -> Vec<Emotion> {
        let verdict = self.lexicon.classify(text);
        let mut rng = self.rng_for(text);
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < PRIMARY_PROBABILITY {
                    verdict.primary
                } else if !verdict.alternatives.is_empty() {
                    verdict.alternatives[rng.random_range(0..verdict.alternatives.len())]
                } else {
                    // any label but the primary
                    let offset = rng.random_range(1..VOCABULARY_SIZE);
                    Emotion::from_index((verdict.primary.index() + offset) % VOCABULARY_SIZE)
                        .expect("index is reduced modulo the vocabulary size")
                }
            })
            .collect()
    }

    pub fn reply(emotion: &str) -> String {
        format!("That sounds {emotion}. Tell me more.")
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        let turns = codec::parse_conversation(&request.prompt)
            .map_err(|e| Error::BackendProtocol(format!("mock backend cannot read prompt: {e}")))?;
        let last = turns
            .last()
            .ok_or_else(|| Error::BackendProtocol("empty prompt".into()))?;
        match (&last.emotion, &last.response) {
            (None, None) => Ok(self
                .sample(&last.prompt, request.n)
                .into_iter()
                .map(|e| e.label().to_string())
                .collect()),
            (Some(emotion), None) => Ok(vec![Self::reply(emotion); request.n]),
            _ => Err(Error::BackendProtocol(
                "prompt does not end in an open emotion or assistant block".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendConfig, Classifier};
    use std::sync::Arc;

    fn e(label: &str) -> Emotion {
        label.parse().unwrap()
    }

    #[test]
    fn every_label_has_at_least_two_keywords() {
        let lexicon = Lexicon::default();
        for emotion in Emotion::all() {
            assert!(lexicon.keywords(emotion).count() >= 2, "{emotion}");
        }
        assert_eq!(KEYWORDS.len(), 32);
        let mut all: Vec<_> = KEYWORDS.iter().flat_map(|(_, w)| w.iter()).collect();
        let total = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), total, "keywords must map to a single label");
    }

    #[test]
    fn matching_is_case_insensitive_longest_and_word_bounded() {
        let lexicon = Lexicon::default();
        assert_eq!(lexicon.classify("I am SAD").primary, e("sad"));
        // `hopeless` is not `hope`
        assert_eq!(lexicon.classify("it is hopeless").primary, e("devastated"));
        // `crusade` does not contain the word `sad`
        assert!(!lexicon.classify("a crusade").matched);
        let hits = lexicon.matches("I can't wait");
        assert_eq!(hits, [(2, 10, e("anticipating"))]);
        assert_eq!(lexicon.classify("nothing here").primary, e("content"));
    }

    #[test]
    fn bug_prompt_draws_from_afraid_and_terrified() {
        let mock = MockBackend::new(7);
        let verdict = mock.lexicon().classify("I'm so scared of bugs!");
        assert_eq!(verdict.primary, e("afraid"));
        assert_eq!(verdict.alternatives, [e("terrified")]);
        for seed in 0..20 {
            let samples = MockBackend::new(seed).sample("I'm so scared of bugs!", 10);
            assert!(samples.iter().all(|s| *s == e("afraid") || *s == e("terrified")));
        }
    }

    #[test]
    fn sampling_is_a_pure_function_of_text_and_seed() {
        let a = MockBackend::new(1);
        let b = MockBackend::new(1);
        let text = "I feel so alone and sad tonight.";
        assert_eq!(a.sample(text, 10), b.sample(text, 10));
        let samples = a.sample(text, 200);
        assert!(samples.iter().all(|s| *s == e("lonely") || *s == e("sad")));
    }

    #[test]
    fn unmatched_alternatives_never_repeat_the_primary() {
        let mock = MockBackend::new(3);
        let samples = mock.sample("I am so grateful", 2000);
        let primary = samples.iter().filter(|s| **s == e("grateful")).count();
        assert!((1500..1700).contains(&primary), "{primary}");
        assert!(samples.iter().any(|s| *s != e("grateful")));
    }

    #[test]
    fn mock_speaks_the_turn_format() {
        let classifier = Classifier::new(Arc::new(MockBackend::new(0)), BackendConfig::mock(0)).unwrap();
        let set = classifier.sample_emotions(&[], "I'm so scared of bugs!").unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.discarded(), 0);
        let reply = classifier
            .generate_reply(&[], "I'm so scared of bugs!", e("terrified"))
            .unwrap();
        assert_eq!(reply, "That sounds terrified. Tell me more.");
    }

    #[test]
    fn mock_rejects_completed_prefixes() {
        let mock = MockBackend::new(0);
        let request = CompletionRequest {
            prompt: "<|prompter|>a<|endoftext|><|emotion|>sad<|endoftext|><|assistant|>b<|endoftext|>".into(),
            max_tokens: 8,
            top_k: 10,
            temperature: 1.0,
            stop: vec![],
            n: 1,
        };
        assert!(mock.complete(&request).is_err());
    }
}
