//! Binary screening evaluation: confusion counts and precision, recall, F1
//! and accuracy for each metric and for the combined rule.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::PathBuf;

use indexmap::IndexMap;
use parking_lot::Mutex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Classifier;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::reference::{post_embedding, CorpusPost};
use crate::registry::Registry;
use crate::screening::{screen, RiskLabel, ScreeningOptions, DISCLAIMER};

/// Name under which the combined rule appears in reports.
pub const COMBINED: &str = "combined";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn record(&mut self, predicted: RiskLabel, gold: RiskLabel) {
        match (predicted.is_positive(), gold.is_positive()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Zero when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Zero when there are no positive gold items.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn scores(&self) -> MethodScores {
        MethodScores {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            accuracy: self.accuracy(),
            confusion: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedLabels {
    pub per_metric: BTreeMap<Metric, RiskLabel>,
    pub combined: RiskLabel,
}

/// One dataset item after screening; `predicted` is `None` when the post
/// yielded no usable emotion samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenedItem {
    pub index: usize,
    pub id: String,
    pub gold: RiskLabel,
    pub predicted: Option<PredictedLabels>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub disclaimer: String,
    /// Items that took part in the confusion counts.
    pub evaluated: usize,
    pub skipped: usize,
    /// Keyed by metric name, then [`COMBINED`].
    pub per_method: IndexMap<String, MethodScores>,
    pub items: Vec<ScreenedItem>,
}

impl EvalReport {
    pub fn from_items(mut items: Vec<ScreenedItem>) -> Self {
        items.sort_by_key(|i| i.index);
        let mut confusions: IndexMap<String, Confusion> = Metric::ALL
            .iter()
            .map(|m| m.name().to_string())
            .chain([COMBINED.to_string()])
            .map(|name| (name, Confusion::default()))
            .collect();
        let mut evaluated = 0;
        for item in &items {
            let Some(predicted) = &item.predicted else { continue };
            evaluated += 1;
            for (m, label) in &predicted.per_metric {
                confusions[m.name()].record(*label, item.gold);
            }
            confusions[COMBINED].record(predicted.combined, item.gold);
        }
        Self {
            disclaimer: DISCLAIMER.to_string(),
            evaluated,
            skipped: items.len() - evaluated,
            per_method: confusions.into_iter().map(|(k, c)| (k, c.scores())).collect(),
            items,
        }
    }

    pub fn method(&self, name: &str) -> Option<&MethodScores> {
        self.per_method.get(name)
    }

    /// Aligned text table with one line per method.
    pub fn render(&self) -> String {
        let mut out = format!("{}\n\n", self.disclaimer);
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6} {:>6}",
            "method", "precision", "recall", "f1", "accuracy", "tp", "fp", "tn", "fn"
        );
        for (name, s) in &self.per_method {
            let c = s.confusion;
            let _ = writeln!(
                out,
                "{:<10} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>6} {:>6} {:>6} {:>6}",
                name, s.precision, s.recall, s.f1, s.accuracy, c.tp, c.fp, c.tn, c.fn_
            );
        }
        let _ = writeln!(out, "\nevaluated {} item(s), skipped {}", self.evaluated, self.skipped);
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub screening: ScreeningOptions,
    /// JSON Lines file of finished items; existing entries are reused and new
    /// ones appended as they complete.
    pub checkpoint: Option<PathBuf>,
}

fn read_checkpoint(path: &std::path::Path) -> Result<HashMap<usize, ScreenedItem>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(e.into()),
    };
    let mut done = HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        // a torn final line from an interrupted run is ignored
        if let Ok(item) = serde_json::from_str::<ScreenedItem>(&line) {
            done.insert(item.index, item);
        }
    }
    Ok(done)
}

/// Parses a dataset's gold labels.
pub fn gold_labels(dataset: &[CorpusPost]) -> Result<Vec<RiskLabel>> {
    dataset
        .iter()
        .map(|post| {
            let raw = post.label.as_deref().unwrap_or_default();
            RiskLabel::parse_gold(raw)
                .ok_or_else(|| Error::MalformedDataset(format!("post `{}` has unusable label `{raw}`", post.id)))
        })
        .collect()
}

fn screen_post(
    index: usize,
    post: &CorpusPost,
    gold: RiskLabel,
    registry: &Registry,
    classifier: &Classifier,
    options: &ScreeningOptions,
) -> Result<ScreenedItem> {
    let predicted = match post_embedding(post, classifier) {
        Ok(profile) => {
            let result = screen(&profile.distribution, registry, options)?;
            Some(PredictedLabels {
                per_metric: result.per_metric.iter().map(|(m, d)| (*m, d.label)).collect(),
                combined: result.combined_label,
            })
        }
        Err(Error::AllSamplesDiscarded { .. } | Error::EmptyCorpusAfterSegmentation) => {
            log::warn!("post `{}` produced no usable samples, skipping", post.id);
            None
        }
        Err(e) => return Err(e),
    };
    Ok(ScreenedItem {
        index,
        id: post.id.clone(),
        gold,
        predicted,
    })
}

/// Embeds and screens every labelled post.
///
/// Backend failures abort the run; items finished before the failure stay in
/// the checkpoint and are not recomputed on the next call.
pub fn evaluate_screening(
    dataset: &[CorpusPost],
    registry: &Registry,
    classifier: &Classifier,
    options: &EvalOptions,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::MalformedDataset("dataset is empty".into()));
    }
    let golds = gold_labels(dataset)?;
    let mut done = match &options.checkpoint {
        Some(path) => read_checkpoint(path)?,
        None => HashMap::new(),
    };
    done.retain(|i, item| dataset.get(*i).is_some_and(|p| p.id == item.id));
    let sink = match &options.checkpoint {
        Some(path) => Some(Mutex::new(
            std::fs::OpenOptions::new().create(true).append(true).open(path)?,
        )),
        None => None,
    };
    let fresh = dataset
        .par_iter()
        .zip(golds.par_iter())
        .enumerate()
        .filter(|(i, _)| !done.contains_key(i))
        .map(|(i, (post, gold))| {
            let item = screen_post(i, post, *gold, registry, classifier, &options.screening)?;
            if let Some(sink) = &sink {
                let mut line = serde_json::to_string(&item)?;
                line.push('\n');
                sink.lock().write_all(line.as_bytes())?;
            }
            Ok(item)
        })
        .collect::<Result<Vec<_>>>()?;
    let items = done.into_values().chain(fresh).collect();
    Ok(EvalReport::from_items(items))
}
