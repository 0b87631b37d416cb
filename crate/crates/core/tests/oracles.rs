//! Expected values recomputed with independent arithmetic (integer counts,
//! exact fractions, direct recounts of mock output) rather than through the
//! code under test.

use emoprofile_core::backend::MockBackend;
use emoprofile_core::metrics::{distance_table, KlDirection};
use emoprofile_core::reference::{build_reference, post_embedding, segment_sentences, BuildOptions, CorpusPost};
use emoprofile_core::{
    cosine_similarity, js_divergence, kl_divergence, BackendConfig, ConversationSession, ConversationTurn, Emotion,
    EmotionDistribution, EmotionSampleSet, Polarity, ReferenceProfile,
};

fn e(label: &str) -> Emotion {
    label.parse().unwrap()
}

fn runs(r: &[(&str, usize)]) -> EmotionSampleSet {
    EmotionSampleSet::new(r.iter().flat_map(|(l, n)| std::iter::repeat_n(e(l), *n)).collect(), 0)
}

#[test]
fn closed_forms_match_direct_summation() {
    let uniform = EmotionDistribution::uniform();
    let delta = EmotionDistribution::delta(e("afraid"));
    // KL(delta ‖ uniform) has one non-zero term: 1 · ln(1 / (1/32))
    let oracle_kl = (1.0f64 / (1.0 / 32.0)).ln();
    assert!((kl_divergence(&delta, &uniform) - oracle_kl).abs() < 1e-9);
    assert!((oracle_kl - 3.4657359027997265).abs() < 1e-12);

    // disjoint deltas: m = (1/2, 1/2) on two bins, each half contributes ln 2
    let oracle_js = 0.5 * (1.0f64 / 0.5).ln() + 0.5 * (1.0f64 / 0.5).ln();
    assert!((js_divergence(&delta, &EmotionDistribution::delta(e("sad"))) - oracle_js).abs() < 1e-9);

    // cos(delta, uniform) = (1/32) / (1 · sqrt(32 / 32²))
    let oracle_cs = (1.0 / 32.0) / (32.0f64 / 1024.0).sqrt();
    assert!((cosine_similarity(&delta, &uniform) - oracle_cs).abs() < 1e-9);
    assert!((oracle_cs - 0.17677669529663687).abs() < 1e-12);
}

#[test]
fn concert_profile_from_exact_fractions() {
    let first = [("excited", 3u64), ("anticipating", 7)];
    let second = [("excited", 8u64), ("joyful", 1), ("anticipating", 1)];
    let mut session = ConversationSession::new("s");
    session.add_turn(ConversationTurn::new("a"), runs(&[("excited", 3), ("anticipating", 7)]));
    session.add_turn(
        ConversationTurn::new("b"),
        runs(&[("excited", 8), ("joyful", 1), ("anticipating", 1)]),
    );
    let profile = session.profile().unwrap().distribution;
    // both turns carry ten samples, so each weight is (c1 + c2) / 20
    for label in ["excited", "anticipating", "joyful"] {
        let c1 = first.iter().find(|(l, _)| *l == label).map_or(0, |p| p.1);
        let c2 = second.iter().find(|(l, _)| *l == label).map_or(0, |p| p.1);
        let oracle = (c1 + c2) as f64 / 20.0;
        assert!((profile.weight(e(label)) - oracle).abs() < 1e-12, "{label}");
    }
    assert_eq!(profile.weight(e("excited")), 0.55);
}

const GLOOM: [&str; 6] = [
    "I feel so sad and lonely tonight.",
    "Everything is hopeless and I am alone.",
    "I was crying again, I feel devastated and isolated.",
    "So miserable. Totally heartbroken and sad.",
    "No friends, just tears.\nStill lonely.",
    "I am unhappy and crushed by all of it.",
];

#[test]
fn gloom_reference_mass_matches_a_recount() {
    let seed = 11;
    let mock = MockBackend::new(seed);
    let mut oracle = [0u64; 32];
    for post in GLOOM {
        for segment in segment_sentences(post) {
            for label in mock.sample(&segment, 10) {
                oracle[label.index()] += 1;
            }
        }
    }
    let classifier = BackendConfig::mock(seed).connect().unwrap();
    let corpus: Vec<_> = GLOOM
        .iter()
        .enumerate()
        .map(|(i, t)| CorpusPost::new(i.to_string(), *t))
        .collect();
    let build = build_reference(
        "gloom",
        Polarity::Positive,
        &corpus,
        &classifier,
        &BuildOptions::default(),
    )
    .unwrap();
    let total: u64 = oracle.iter().sum();
    assert_eq!(build.valid_samples, total);
    for (i, &count) in oracle.iter().enumerate() {
        let w = build.reference.distribution.weights()[i];
        assert!((w - count as f64 / total as f64).abs() < 1e-12);
    }
    let top: Vec<_> = build
        .reference
        .distribution
        .top(3)
        .into_iter()
        .map(|(e, _)| e.label())
        .collect();
    let mut top_sorted = top.clone();
    top_sorted.sort();
    assert_eq!(top_sorted, ["devastated", "lonely", "sad"], "top three were {top:?}");
}

#[test]
fn concatenated_posts_are_a_count_weighted_mix() {
    let classifier = BackendConfig::mock(5).connect().unwrap();
    let a = CorpusPost::new("a", "I am so sad today. Nobody calls, I am alone.");
    let b = CorpusPost::new("b", "What a joyful morning! I feel grateful.\nThanks to everyone.");
    let joined = CorpusPost::new("ab", format!("{}\n{}", a.text, b.text));
    let (ea, eb, eab) = (
        post_embedding(&a, &classifier).unwrap(),
        post_embedding(&b, &classifier).unwrap(),
        post_embedding(&joined, &classifier).unwrap(),
    );
    // the mock always returns ten valid samples per segment
    let weight = |p: &CorpusPost| (segment_sentences(&p.text).len() * 10) as f64;
    let oracle = EmotionDistribution::mix(&[(ea.distribution, weight(&a)), (eb.distribution, weight(&b))]).unwrap();
    for (x, y) in eab.distribution.weights().iter().zip(oracle.weights()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn synthetic_anchor_sorts_the_nearer_reference_first() {
    let named = |pairs: &[(&str, u64)]| EmotionDistribution::from_named_counts(pairs.iter().copied()).unwrap();
    let anchor = named(&[("sad", 6), ("lonely", 3), ("afraid", 1)]);
    let near = named(&[("sad", 5), ("lonely", 4), ("afraid", 1)]);
    let far = named(&[("sad", 1), ("lonely", 1), ("afraid", 8)]);
    // brute force: the near profile wins each metric by a clear margin
    assert!(kl_divergence(&near, &anchor) < kl_divergence(&far, &anchor));
    assert!(js_divergence(&near, &anchor) < js_divergence(&far, &anchor));
    assert!(cosine_similarity(&near, &anchor) > cosine_similarity(&far, &anchor));
    let refs = [
        ReferenceProfile::new("r2", Polarity::Negative, far),
        ReferenceProfile::new("r1", Polarity::Positive, near),
    ];
    let rows = distance_table(&anchor, &refs, KlDirection::RowToAnchor).unwrap();
    assert_eq!(rows[0].reference_name, "r1");
}
