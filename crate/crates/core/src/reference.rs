//! Corpus ingestion: posts are split into sentences, each sentence is
//! classified, and the raw emotion counts are summed into a reference profile.

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Classifier;
use crate::emotion::{EmotionDistribution, EmotionSampleSet, VOCABULARY_SIZE};
use crate::error::{Error, Result};
use crate::profile::EmotionalProfile;

/// Screening role of a reference profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Unused,
}

const POSITIVE_NAMES: [&str; 7] = [
    "suicide",
    "depression",
    "bpd",
    "bipolar",
    "ptsd",
    "addiction",
    "schizophrenia",
];
const NEGATIVE_NAMES: [&str; 3] = ["normal", "uniform", "casualConversation"];
const UNUSED_NAMES: [&str; 8] = [
    "alcoholism",
    "eatingDisorder",
    "socialAnxiety",
    "autism",
    "adhd",
    "anxiety",
    "lonely",
    "healthAnxiety",
];

impl Polarity {
    /// The polarity pinned to a well-known reference name, if any.
    pub fn fixed_for(name: &str) -> Option<Polarity> {
        let is = |names: &[&str]| names.iter().any(|n| n.eq_ignore_ascii_case(name));
        if is(&POSITIVE_NAMES) {
            Some(Polarity::Positive)
        } else if is(&NEGATIVE_NAMES) {
            Some(Polarity::Negative)
        } else if is(&UNUSED_NAMES) {
            Some(Polarity::Unused)
        } else {
            None
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Unused => "unused",
        })
    }
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pos" | "positive" => Ok(Polarity::Positive),
            "neg" | "negative" => Ok(Polarity::Negative),
            "unused" => Ok(Polarity::Unused),
            other => Err(Error::InvalidConfig(format!("unknown polarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    pub name: String,
    pub polarity: Polarity,
    pub distribution: EmotionDistribution,
    #[serde(default)]
    pub post_count: usize,
    #[serde(default)]
    pub segment_count: usize,
    #[serde(default)]
    pub source: String,
}

impl ReferenceProfile {
    pub fn new(name: impl Into<String>, polarity: Polarity, distribution: EmotionDistribution) -> Self {
        Self {
            name: name.into(),
            polarity,
            distribution,
            post_count: 0,
            segment_count: 0,
            source: String::new(),
        }
    }

    /// The uniform control reference.
    pub fn uniform() -> Self {
        Self {
            source: "uniform distribution".into(),
            ..Self::new("uniform", Polarity::Negative, EmotionDistribution::uniform())
        }
    }

    /// Checks a name/polarity pair against the pinned polarities.
    pub fn check_polarity(name: &str, polarity: Polarity) -> Result<()> {
        match Polarity::fixed_for(name) {
            Some(fixed) if fixed != polarity => Err(Error::schema(
                "polarity",
                format!("`{name}` is always {fixed}, not {polarity}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPost {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl CorpusPost {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label: None,
        }
    }
}

/// Segments shorter than this many characters are dropped.
pub const MIN_SEGMENT_CHARS: usize = 3;

/// Splits text into sentences at `.`, `!` or `?` runs followed by whitespace
/// or the end of input, and at newlines. Segments are trimmed and short ones
/// dropped, except that a post whose segments are all short keeps its last one.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let cut = match c {
            '\n' | '\r' => Some(i),
            '.' | '!' | '?' => {
                let mut end = i + c.len_utf8();
                while let Some(&(j, p)) = chars.peek() {
                    if matches!(p, '.' | '!' | '?') {
                        end = j + p.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                let at_break = chars.peek().is_none_or(|&(_, n)| n.is_whitespace());
                at_break.then_some(end)
            }
            _ => None,
        };
        if let Some(end) = cut {
            pieces.push(&text[start..end]);
            start = end;
        }
    }
    pieces.push(&text[start..]);

    let pieces: Vec<&str> = pieces.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect();
    let kept: Vec<String> = pieces
        .iter()
        .filter(|p| p.chars().count() >= MIN_SEGMENT_CHARS)
        .map(|p| p.to_string())
        .collect();
    if kept.is_empty() {
        pieces.last().map(|p| vec![p.to_string()]).unwrap_or_default()
    } else {
        kept
    }
}

/// How per-segment samples are combined into one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Sum raw counts over every segment, then normalize once.
    #[default]
    RawCounts,
    /// Normalize each segment first, then average.
    PerSegment,
}

/// Posts outside `[min_chars, max_chars]` are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthFilter {
    pub min_chars: usize,
    pub max_chars: usize,
}

impl Default for LengthFilter {
    fn default() -> Self {
        Self {
            min_chars: 20,
            max_chars: 10_000,
        }
    }
}

impl LengthFilter {
    pub fn accepts(&self, text: &str) -> bool {
        let n = text.trim().chars().count();
        (self.min_chars..=self.max_chars).contains(&n)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub aggregation: Aggregation,
    pub length_filter: Option<LengthFilter>,
    pub source: String,
    /// Worker threads for segment classification; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// A built reference plus the sample accounting behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBuild {
    pub reference: ReferenceProfile,
    pub skipped_posts: usize,
    pub valid_samples: u64,
    pub discarded_samples: u64,
}

struct SegmentTally {
    counts: [u64; VOCABULARY_SIZE],
    valid: u64,
    discarded: u64,
}

fn classify_segment(classifier: &Classifier, segment: &str) -> Result<SegmentTally> {
    let set = match classifier.sample_emotions(&[], segment) {
        Ok(set) => set,
        Err(Error::AllSamplesDiscarded { discarded }) => EmotionSampleSet::new(Vec::new(), discarded),
        Err(e) => return Err(e),
    };
    let mut counts = [0u64; VOCABULARY_SIZE];
    for e in set.samples() {
        counts[e.index()] += 1;
    }
    Ok(SegmentTally {
        counts,
        valid: set.len() as u64,
        discarded: set.discarded() as u64,
    })
}

fn classify_all(classifier: &Classifier, segments: &[String], workers: Option<usize>) -> Result<Vec<SegmentTally>> {
    let run = || {
        segments
            .par_iter()
            .map(|s| classify_segment(classifier, s))
            .collect::<Result<Vec<_>>>()
    };
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run),
        None => run(),
    }
}

fn aggregate(tallies: &[SegmentTally], aggregation: Aggregation) -> Result<EmotionDistribution> {
    let discarded: u64 = tallies.iter().map(|t| t.discarded).sum();
    let no_samples = || Error::AllSamplesDiscarded {
        discarded: discarded as usize,
    };
    match aggregation {
        Aggregation::RawCounts => {
            let mut total = [0.0; VOCABULARY_SIZE];
            for t in tallies {
                for (acc, &c) in total.iter_mut().zip(&t.counts) {
                    *acc += c as f64;
                }
            }
            EmotionDistribution::normalized(total).map_err(|_| no_samples())
        }
        Aggregation::PerSegment => {
            let mut total = [0.0; VOCABULARY_SIZE];
            for t in tallies.iter().filter(|t| t.valid > 0) {
                for (acc, &c) in total.iter_mut().zip(&t.counts) {
                    *acc += c as f64 / t.valid as f64;
                }
            }
            EmotionDistribution::normalized(total).map_err(|_| no_samples())
        }
    }
}

/// Builds a reference profile from a corpus.
pub fn build_reference(
    name: &str,
    polarity: Polarity,
    corpus: &[CorpusPost],
    classifier: &Classifier,
    options: &BuildOptions,
) -> Result<ReferenceBuild> {
    ReferenceProfile::check_polarity(name, polarity)?;
    let mut segments = Vec::new();
    let mut post_count = 0;
    let mut skipped = 0;
    for post in corpus {
        if options.length_filter.is_some_and(|f| !f.accepts(&post.text)) {
            skipped += 1;
            continue;
        }
        let parts = segment_sentences(&post.text);
        if parts.is_empty() {
            skipped += 1;
            continue;
        }
        post_count += 1;
        segments.extend(parts);
    }
    if segments.is_empty() {
        return Err(Error::EmptyCorpusAfterSegmentation);
    }
    let tallies = classify_all(classifier, &segments, options.workers)?;
    let distribution = aggregate(&tallies, options.aggregation)?;
    Ok(ReferenceBuild {
        reference: ReferenceProfile {
            name: name.to_string(),
            polarity,
            distribution,
            post_count,
            segment_count: segments.len(),
            source: options.source.clone(),
        },
        skipped_posts: skipped,
        valid_samples: tallies.iter().map(|t| t.valid).sum(),
        discarded_samples: tallies.iter().map(|t| t.discarded).sum(),
    })
}

/// The screening-time embedding of a single post: raw counts over its sentences.
pub fn post_embedding(post: &CorpusPost, classifier: &Classifier) -> Result<EmotionalProfile> {
    let segments = segment_sentences(&post.text);
    if segments.is_empty() {
        return Err(Error::EmptyCorpusAfterSegmentation);
    }
    let tallies = segments
        .iter()
        .map(|s| classify_segment(classifier, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmotionalProfile {
        distribution: aggregate(&tallies, Aggregation::RawCounts)?,
        prompt_count: tallies.iter().filter(|t| t.valid > 0).count(),
        source: post.id.clone(),
    })
}

#[derive(Deserialize)]
struct RawPost {
    #[serde(default)]
    id: Option<serde_json::Value>,
    text: String,
    #[serde(default, alias = "class")]
    label: Option<String>,
}

fn accept(raw: RawPost, fallback_id: usize, posts: &mut Vec<CorpusPost>) {
    if raw.text.trim().is_empty() {
        log::warn!("skipping empty post {fallback_id}");
        return;
    }
    let id = match raw.id {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Null) | None => fallback_id.to_string(),
        Some(other) => other.to_string(),
    };
    posts.push(CorpusPost {
        id,
        text: raw.text,
        label: raw.label,
    });
}

/// Reads posts from JSON Lines (`{id, text, label?}` per line).
pub fn read_corpus_jsonl<R: BufRead>(reader: R) -> Result<Vec<CorpusPost>> {
    let mut posts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPost =
            serde_json::from_str(&line).map_err(|e| Error::MalformedDataset(format!("line {}: {e}", i + 1)))?;
        accept(raw, i, &mut posts);
    }
    Ok(posts)
}

/// Reads posts from CSV with a `text` column and optional `id` and
/// `label` (or `class`) columns.
pub fn read_corpus_csv<R: std::io::Read>(reader: R) -> Result<Vec<CorpusPost>> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let column = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let text_col =
        column(&["text"]).ok_or_else(|| Error::MalformedDataset("CSV corpus needs a `text` column".into()))?;
    let id_col = column(&["id", "post_id"]);
    let label_col = column(&["label", "class"]);
    let mut posts = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let field = |c: Option<usize>| c.and_then(|c| record.get(c)).map(str::to_string);
        let raw = RawPost {
            id: field(id_col).map(serde_json::Value::String),
            text: field(Some(text_col)).unwrap_or_default(),
            label: field(label_col),
        };
        accept(raw, i, &mut posts);
    }
    Ok(posts)
}

/// Picks the reader from the file extension (`.csv` or JSON Lines otherwise).
pub fn read_corpus(path: &Path) -> Result<Vec<CorpusPost>> {
    let file = std::fs::File::open(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_corpus_csv(file)
    } else {
        read_corpus_jsonl(std::io::BufReader::new(file))
    }
}
