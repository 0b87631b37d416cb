//! Nearest-reference risk screening.
//!
//! Each metric independently picks the reference nearest to the sample (the
//! minimum for KL and JS, the maximum for cosine similarity) and adopts its
//! polarity. The combined label is positive as soon as any metric says so.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::emotion::EmotionDistribution;
use crate::error::{Error, Result};
use crate::metrics::{DistanceRow, KlDirection, Metric};
use crate::reference::{Polarity, ReferenceProfile};
use crate::registry::Registry;

/// Values within this band of the best one count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const DISCLAIMER: &str = "Not a diagnostic tool. Screening output is a research signal, not a clinical assessment.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskLabel {
    Positive,
    Negative,
}

impl RiskLabel {
    pub fn is_positive(self) -> bool {
        self == RiskLabel::Positive
    }

    /// Accepts `positive`/`pos`/`suicide`/`1` and `negative`/`neg`/`non-suicide`/`0`.
    pub fn parse_gold(s: &str) -> Option<RiskLabel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "suicide" | "1" | "true" => Some(RiskLabel::Positive),
            "negative" | "neg" | "non-suicide" | "0" | "false" => Some(RiskLabel::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for RiskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskLabel::Positive => "positive",
            RiskLabel::Negative => "negative",
        })
    }
}

impl From<Polarity> for RiskLabel {
    /// Only positive references signal risk; unused distractors count as negative.
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Positive => RiskLabel::Positive,
            Polarity::Negative | Polarity::Unused => RiskLabel::Negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDecision {
    /// `None` only for KL when every reference is infinitely far.
    pub nearest: Option<String>,
    pub value: Option<f64>,
    pub label: RiskLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub per_metric: BTreeMap<Metric, MetricDecision>,
    pub combined_label: RiskLabel,
    pub distance_rows: Vec<DistanceRow>,
}

impl ScreeningResult {
    pub fn label(&self, metric: Metric) -> RiskLabel {
        self.per_metric[&metric].label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreeningOptions {
    /// `AnchorToRow` measures `KL(sample ‖ reference)`.
    pub kl_direction: KlDirection,
    /// Also search references of unused polarity (as negative distractors).
    pub include_all_references: bool,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        Self {
            kl_direction: KlDirection::AnchorToRow,
            include_all_references: false,
        }
    }
}

fn decide(metric: Metric, candidates: &[&ReferenceProfile], rows: &[DistanceRow]) -> MetricDecision {
    let better = |a: f64, b: f64| if metric.higher_is_nearer() { a > b } else { a < b };
    let best =
        rows.iter()
            .map(|r| r.value(metric))
            .filter(|v| v.is_finite())
            .fold(None, |acc: Option<f64>, v| match acc {
                Some(b) if !better(v, b) => Some(b),
                _ => Some(v),
            });
    let Some(best) = best else {
        return MetricDecision {
            nearest: None,
            value: None,
            label: RiskLabel::Negative,
        };
    };
    let tied: Vec<usize> = (0..rows.len())
        .filter(|&i| (rows[i].value(metric) - best).abs() <= TIE_TOLERANCE)
        .collect();
    let chosen = tied
        .iter()
        .copied()
        .find(|&i| candidates[i].polarity == Polarity::Positive)
        .unwrap_or(tied[0]);
    MetricDecision {
        nearest: Some(candidates[chosen].name.clone()),
        value: Some(rows[chosen].value(metric)),
        label: candidates[chosen].polarity.into(),
    }
}

/// Screens a sample distribution against the registry.
pub fn screen(
    sample: &EmotionDistribution,
    registry: &Registry,
    options: &ScreeningOptions,
) -> Result<ScreeningResult> {
    let candidates = registry.screening_set(options.include_all_references);
    for (polarity, name) in [(Polarity::Positive, "positive"), (Polarity::Negative, "negative")] {
        if !candidates.iter().any(|r| r.polarity == polarity) {
            return Err(Error::MissingPolarityClass(name));
        }
    }
    // rows stay in registry order here so ties resolve by position
    let rows: Vec<DistanceRow> = candidates
        .iter()
        .map(|r| DistanceRow::compare(&r.name, &r.distribution, sample, options.kl_direction))
        .collect();
    let per_metric: BTreeMap<_, _> = Metric::ALL
        .into_iter()
        .map(|m| (m, decide(m, &candidates, &rows)))
        .collect();
    let combined_label = if per_metric.values().any(|d| d.label.is_positive()) {
        RiskLabel::Positive
    } else {
        RiskLabel::Negative
    };
    let mut distance_rows = rows;
    distance_rows.sort_by(|a, b| a.kl.total_cmp(&b.kl));
    Ok(ScreeningResult {
        per_metric,
        combined_label,
        distance_rows,
    })
}
