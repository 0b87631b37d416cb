#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use emoprofile_core::backend::Lexicon;
use emoprofile_core::Emotion;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Labels behind the "gloom" corpus; disjoint from [`CHEER`].
pub const GLOOM: [&str; 8] = [
    "sad",
    "lonely",
    "devastated",
    "afraid",
    "anxious",
    "guilty",
    "ashamed",
    "terrified",
];
/// Labels behind the "cheer" corpus.
pub const CHEER: [&str; 8] = [
    "joyful",
    "grateful",
    "content",
    "proud",
    "hopeful",
    "confident",
    "impressed",
    "trusting",
];

const OPENERS: [&str; 4] = ["I feel", "Lately I am", "Honestly I was", "Today I felt"];

/// Single-word keywords the mock lexicon maps to `label`.
pub fn keywords(lexicon: &Lexicon, label: &str) -> Vec<String> {
    let emotion: Emotion = label.parse().unwrap();
    lexicon
        .keywords(emotion)
        .filter(|k| k.chars().all(|c| c.is_ascii_alphabetic()))
        .map(str::to_string)
        .collect()
}

/// Posts of one to three sentences, each sentence naming two different labels
/// of `labels` through their lexicon keywords.
///
/// Every sentence is checked against the lexicon: it matches exactly two
/// labels, both from `labels`.
pub fn class_posts(labels: &[&str], n: usize, seed: u64) -> Vec<String> {
    let lexicon = Lexicon::default();
    let words: Vec<Vec<String>> = labels.iter().map(|l| keywords(&lexicon, l)).collect();
    let allowed: Vec<Emotion> = labels.iter().map(|l| l.parse().unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let sentences = rng.random_range(1..=3);
            (0..sentences)
                .map(|_| {
                    let mut picks: Vec<usize> = (0..labels.len()).collect();
                    picks.shuffle(&mut rng);
                    let a = words[picks[0]].choose(&mut rng).unwrap();
                    let b = words[picks[1]].choose(&mut rng).unwrap();
                    let sentence = format!("{} {a} and {b}.", OPENERS.choose(&mut rng).unwrap());
                    let verdict = lexicon.classify(&sentence);
                    let mut matched = vec![verdict.primary];
                    matched.extend(&verdict.alternatives);
                    assert!(verdict.matched && matched.len() == 2, "{sentence}");
                    assert!(matched.iter().all(|e| allowed.contains(e)), "{sentence}");
                    sentence
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Posts mixing keywords from both classes and plain filler, for runs where
/// the metrics should disagree now and then.
pub fn mixed_posts(n: usize, seed: u64) -> Vec<String> {
    let lexicon = Lexicon::default();
    let pool: Vec<String> = GLOOM
        .iter()
        .chain(CHEER.iter())
        .flat_map(|l| keywords(&lexicon, l))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.random_range(0..=4);
            let mut words: Vec<&str> = (0..k).map(|_| pool.choose(&mut rng).unwrap().as_str()).collect();
            words.push("things happened");
            words.shuffle(&mut rng);
            format!("Well {}.", words.join(" and "))
        })
        .collect()
}

pub fn write_jsonl(path: &Path, posts: &[String]) {
    let body: String = posts
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}\n", serde_json::json!({"id": i, "text": t})))
        .collect();
    std::fs::write(path, body).unwrap();
}

/// CSV with `id,text,label`.
pub fn write_labelled_csv(path: &Path, rows: &[(String, &str)]) {
    let mut writer = csv::Writer::from_path(path).unwrap();
    writer.write_record(["id", "text", "label"]).unwrap();
    for (i, (text, label)) in rows.iter().enumerate() {
        writer
            .write_record([format!("p{i}"), text.clone(), label.to_string()])
            .unwrap();
    }
    writer.flush().unwrap();
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_emoprofile"))
}

/// Runs the binary with `args`, feeding `stdin`.
pub fn run(args: &[&str], stdin: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(bin())
        .args(args)
        .env_remove("EMOPROFILE_BACKEND_ENDPOINT")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

/// Builds the gloom (`suicide`, positive) and cheer (`normal`, negative)
/// references into `dir/registry.json` and returns its path.
pub fn build_mock_registry(dir: &Path, posts_per_class: usize, seed: u64) -> PathBuf {
    let registry = dir.join("registry.json");
    for (name, polarity, labels, corpus_seed) in [("suicide", "pos", &GLOOM, 1), ("normal", "neg", &CHEER, 2)] {
        let corpus = dir.join(format!("{name}.jsonl"));
        write_jsonl(&corpus, &class_posts(labels, posts_per_class, corpus_seed));
        let seed = seed.to_string();
        let output = run(
            &[
                "--seed",
                &seed,
                "build-ref",
                "--name",
                name,
                "--polarity",
                polarity,
                "--corpus",
                corpus.to_str().unwrap(),
                "--out",
                registry.to_str().unwrap(),
            ],
            "",
        );
        assert!(output.status.success(), "{}", stderr(&output));
    }
    registry
}
