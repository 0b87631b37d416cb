//! Divergences and similarities between emotion distributions.
//!
//! Both divergences use the natural logarithm and no smoothing: a KL term
//! with mass on a bin the other side lacks is `+inf`. Infinite values are
//! serialized as the string `"inf"`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::emotion::EmotionDistribution;
use crate::error::{Error, Result};
use crate::reference::ReferenceProfile;

/// `Σ p_i ln(p_i / q_i)`, with `0 ln(0/q) = 0` and `p ln(p/0) = +inf`.
pub fn kl_divergence(p: &EmotionDistribution, q: &EmotionDistribution) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.weights().iter().zip(q.weights()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi / qi).ln();
    }
    total.max(0.0)
}

/// Jensen–Shannon divergence in nats; symmetric and bounded by `ln 2`.
pub fn js_divergence(p: &EmotionDistribution, q: &EmotionDistribution) -> f64 {
    let half = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(ai, _)| **ai > 0.0)
            .map(|(&ai, &bi)| ai * (2.0 * ai / (ai + bi)).ln())
            .sum()
    };
    let (pw, qw) = (p.weights(), q.weights());
    (0.5 * half(pw, qw) + 0.5 * half(qw, pw)).clamp(0.0, std::f64::consts::LN_2)
}

pub fn cosine_similarity(p: &EmotionDistribution, q: &EmotionDistribution) -> f64 {
    let (pw, qw) = (p.weights(), q.weights());
    let dot: f64 = pw.iter().zip(qw).map(|(a, b)| a * b).sum();
    let square = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
    // one square root of the product keeps cs(p, p) exactly 1
    (dot / (square(pw) * square(qw)).sqrt()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Kl,
    Js,
    Cs,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Kl, Metric::Js, Metric::Cs];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Kl => "kl",
            Metric::Js => "js",
            Metric::Cs => "cs",
        }
    }

    /// Cosine similarity is maximized, the divergences minimized.
    pub fn higher_is_nearer(self) -> bool {
        self == Metric::Cs
    }
}

/// Which side of a comparison goes first in the (asymmetric) KL divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// `KL(row ‖ anchor)`: each listed profile measured against the anchor.
    #[default]
    RowToAnchor,
    /// `KL(anchor ‖ row)`.
    AnchorToRow,
}

impl std::str::FromStr for KlDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row-to-anchor" | "candidate-anchor" => Ok(KlDirection::RowToAnchor),
            "anchor-to-row" | "anchor-candidate" => Ok(KlDirection::AnchorToRow),
            other => Err(Error::InvalidConfig(format!("unknown KL direction `{other}`"))),
        }
    }
}

pub(crate) mod inf_string {
    use serde::de::{self, Deserializer};
    use serde::{Deserialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
struct InfAware(#[serde(with = "inf_string")] f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    #[serde(rename = "reference")]
    pub reference_name: String,
    #[serde(with = "inf_string")]
    pub kl: f64,
    pub js: f64,
    pub cs: f64,
}

impl DistanceRow {
    pub fn compare(
        name: impl Into<String>,
        row: &EmotionDistribution,
        anchor: &EmotionDistribution,
        direction: KlDirection,
    ) -> Self {
        let kl = match direction {
            KlDirection::RowToAnchor => kl_divergence(row, anchor),
            KlDirection::AnchorToRow => kl_divergence(anchor, row),
        };
        Self {
            reference_name: name.into(),
            kl,
            js: js_divergence(row, anchor),
            cs: cosine_similarity(row, anchor),
        }
    }

    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Kl => self.kl,
            Metric::Js => self.js,
            Metric::Cs => self.cs,
        }
    }
}

/// Every reference compared against `anchor`, sorted by ascending KL with
/// infinite rows last; the sort is stable so equal rows keep reference order.
pub fn distance_table(
    anchor: &EmotionDistribution,
    references: &[ReferenceProfile],
    direction: KlDirection,
) -> Result<Vec<DistanceRow>> {
    if references.is_empty() {
        return Err(Error::EmptyReferenceSet);
    }
    let mut rows: Vec<_> = references
        .iter()
        .map(|r| DistanceRow::compare(&r.name, &r.distribution, anchor, direction))
        .collect();
    rows.sort_by(|a, b| a.kl.total_cmp(&b.kl));
    Ok(rows)
}

/// Three-decimal rendering with `inf` for infinite values.
pub fn format_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.3}")
    }
}

/// Aligned plain-text table: one `name kl js cs` line per row.
pub fn render_table(rows: &[DistanceRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.reference_name.len())
        .chain(["reference".len()])
        .max()
        .unwrap_or(0);
    let mut out = format!("{:<width$} {:>7} {:>7} {:>7}\n", "reference", "kl", "js", "cs");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$} {:>7} {:>7} {:>7}",
            r.reference_name,
            format_value(r.kl),
            format_value(r.js),
            format_value(r.cs)
        );
    }
    out
}

pub fn render_csv(rows: &[DistanceRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["reference", "kl", "js", "cs"])?;
    for r in rows {
        writer.write_record([
            r.reference_name.clone(),
            format_value(r.kl),
            format_value(r.js),
            format_value(r.cs),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// All-pairs comparison of a reference set. `kl[i][j]` is the KL entry of
/// reference `j` in the distance table anchored at reference `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    pub names: Vec<String>,
    pub kl: Vec<Vec<f64>>,
    pub js: Vec<Vec<f64>>,
    pub cs: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    pub fn compute(references: &[ReferenceProfile], direction: KlDirection) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::EmptyReferenceSet);
        }
        let n = references.len();
        let mut m = Self {
            names: references.iter().map(|r| r.name.clone()).collect(),
            kl: vec![vec![0.0; n]; n],
            js: vec![vec![0.0; n]; n],
            cs: vec![vec![0.0; n]; n],
        };
        for (i, anchor) in references.iter().enumerate() {
            for (j, row) in references.iter().enumerate() {
                let d = DistanceRow::compare(&row.name, &row.distribution, &anchor.distribution, direction);
                m.kl[i][j] = d.kl;
                m.js[i][j] = d.js;
                m.cs[i][j] = d.cs;
            }
        }
        Ok(m)
    }

    /// Long-format CSV: `anchor,reference,kl,js,cs`.
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["anchor", "reference", "kl", "js", "cs"])?;
        for (i, anchor) in self.names.iter().enumerate() {
            for (j, name) in self.names.iter().enumerate() {
                writer.write_record([
                    anchor.clone(),
                    name.clone(),
                    format_value(self.kl[i][j]),
                    format_value(self.js[i][j]),
                    format_value(self.cs[i][j]),
                ])?;
            }
        }
        let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

impl Serialize for PairwiseMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            names: &'a [String],
            kl: Vec<Vec<InfAware>>,
            js: &'a [Vec<f64>],
            cs: &'a [Vec<f64>],
        }
        Repr {
            names: &self.names,
            kl: self
                .kl
                .iter()
                .map(|row| row.iter().copied().map(InfAware).collect())
                .collect(),
            js: &self.js,
            cs: &self.cs,
        }
        .serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotion::Emotion;
    use crate::reference::Polarity;

    fn e(label: &str) -> Emotion {
        label.parse().unwrap()
    }

    fn reference(name: &str, d: EmotionDistribution) -> ReferenceProfile {
        ReferenceProfile::new(name, Polarity::Positive, d)
    }

    #[test]
    fn self_comparison() {
        let p = EmotionDistribution::from_named_counts([("sad", 3), ("lonely", 2), ("afraid", 5)]).unwrap();
        assert_eq!(kl_divergence(&p, &p), 0.0);
        assert_eq!(js_divergence(&p, &p), 0.0);
        assert!((cosine_similarity(&p, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_deltas() {
        let a = EmotionDistribution::delta(e("afraid"));
        let s = EmotionDistribution::delta(e("sad"));
        assert_eq!(kl_divergence(&a, &s), f64::INFINITY);
        assert!((js_divergence(&a, &s) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(cosine_similarity(&a, &s), 0.0);
    }

    #[test]
    fn kl_is_infinite_only_without_support() {
        let u = EmotionDistribution::uniform();
        let a = EmotionDistribution::delta(e("afraid"));
        assert!(kl_divergence(&a, &u).is_finite());
        assert_eq!(kl_divergence(&u, &a), f64::INFINITY);
    }

    #[test]
    fn table_sorts_infinities_last_and_self_first() {
        let anchor = EmotionDistribution::from_named_counts([("sad", 5), ("lonely", 5)]).unwrap();
        let near = EmotionDistribution::from_named_counts([("sad", 6), ("lonely", 4)]).unwrap();
        let off = EmotionDistribution::from_named_counts([("sad", 5), ("anxious", 5)]).unwrap();
        let refs = vec![
            reference("off", off),
            reference("near", near),
            reference("self", anchor),
        ];
        let rows = distance_table(&anchor, &refs, KlDirection::RowToAnchor).unwrap();
        let names: Vec<_> = rows.iter().map(|r| r.reference_name.as_str()).collect();
        assert_eq!(names, ["self", "near", "off"]);
        assert_eq!((rows[0].kl, rows[0].js, rows[0].cs), (0.0, 0.0, 1.0));
        assert!(rows[2].kl.is_infinite());

        assert!(matches!(
            distance_table(&anchor, &[], KlDirection::RowToAnchor),
            Err(Error::EmptyReferenceSet)
        ));
    }

    #[test]
    fn identical_references_give_identical_rows() {
        let u = EmotionDistribution::uniform();
        let anchor = EmotionDistribution::from_named_counts([("sad", 1), ("proud", 3)]).unwrap();
        let refs = vec![reference("a", u), reference("b", u), reference("c", u)];
        let rows = distance_table(&anchor, &refs, KlDirection::RowToAnchor).unwrap();
        assert!(rows
            .windows(2)
            .all(|w| (w[0].kl, w[0].js, w[0].cs) == (w[1].kl, w[1].js, w[1].cs)));
        assert_eq!(rows[0].reference_name, "a");
    }

    #[test]
    fn rendering() {
        let rows = vec![
            DistanceRow {
                reference_name: "suicide".into(),
                kl: 0.0,
                js: 0.0,
                cs: 1.0,
            },
            DistanceRow {
                reference_name: "lonely".into(),
                kl: f64::INFINITY,
                js: 0.4291,
                cs: 0.5789,
            },
        ];
        let table = render_table(&rows);
        let lines: Vec<_> = table.lines().collect();
        assert_eq!(
            lines[1].split_whitespace().collect::<Vec<_>>(),
            ["suicide", "0.000", "0.000", "1.000"]
        );
        assert_eq!(
            lines[2].split_whitespace().collect::<Vec<_>>(),
            ["lonely", "inf", "0.429", "0.579"]
        );
        assert_eq!(
            render_csv(&rows).unwrap(),
            "reference,kl,js,cs\nsuicide,0.000,0.000,1.000\nlonely,inf,0.429,0.579\n"
        );
        let json = serde_json::to_string(&rows[1]).unwrap();
        assert!(json.contains(r#""kl":"inf""#), "{json}");
        let back: DistanceRow = serde_json::from_str(&json).unwrap();
        assert!(back.kl.is_infinite());
    }

    #[test]
    fn direction_parsing() {
        assert_eq!(
            "candidate-anchor".parse::<KlDirection>().unwrap(),
            KlDirection::RowToAnchor
        );
        assert_eq!(
            "anchor-to-row".parse::<KlDirection>().unwrap(),
            KlDirection::AnchorToRow
        );
        assert!("sideways".parse::<KlDirection>().is_err());
    }

    #[test]
    fn pairwise_matrix_has_zero_diagonal() {
        let refs = vec![
            reference("a", EmotionDistribution::delta(e("sad"))),
            reference("b", EmotionDistribution::uniform()),
        ];
        let m = PairwiseMatrix::compute(&refs, KlDirection::RowToAnchor).unwrap();
        for i in 0..2 {
            assert_eq!(m.kl[i][i], 0.0);
            assert_eq!(m.js[i][i], 0.0);
            assert!((m.cs[i][i] - 1.0).abs() < 1e-12);
        }
        // row b (uniform) against anchor a (delta) has no support
        assert!(m.kl[0][1].is_infinite());
        assert!(m.kl[1][0].is_finite());
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["kl"][0][1], "inf");
        assert!(m.to_csv().unwrap().starts_with("anchor,reference,kl,js,cs\na,a,0.000"));
    }
}
