//! Evaluation harnesses for screening and emotion classification.

mod binary;
mod emotions;

pub use binary::{
    evaluate_screening, gold_labels, Confusion, EvalOptions, EvalReport, MethodScores, PredictedLabels, ScreenedItem,
    COMBINED,
};
pub use emotions::{
    classify_dialogue, evaluate_emotion_classification, read_dialogues, read_dialogues_csv, read_dialogues_jsonl,
    ClassScores, ClassificationReport, Dialogue, DialogueOutcome, EmotionEvalReport, PromptPrediction, Role, Utterance,
};
