//! Confusion counts, TNR/TPR/balanced F1 and price-weighted token cost.
//!
//! The positive class is "proof is correct". Rates are exact rationals and
//! only become decimals when a report is rendered.

use std::fmt;
use std::ops::{Add, AddAssign};

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::model::{ProofLabel, TokenUsage};

pub type Rational = Ratio<i128>;

/// Input tokens per output token at equal price, for the reference model.
pub const DEFAULT_INPUT_WEIGHT: i128 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("input weight must be positive")]
    NonPositiveWeight,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
    pub undecided_pos: u64,
    pub undecided_neg: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, gt_label: bool, predicted: ProofLabel) {
        let slot = match (gt_label, predicted) {
            (true, ProofLabel::Correct) => &mut self.tp,
            (true, ProofLabel::Incorrect) => &mut self.fn_,
            (true, ProofLabel::Undecided) => &mut self.undecided_pos,
            (false, ProofLabel::Incorrect) => &mut self.tn,
            (false, ProofLabel::Correct) => &mut self.fp,
            (false, ProofLabel::Undecided) => &mut self.undecided_neg,
        };
        *slot += 1;
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_ + self.undecided_pos
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp + self.undecided_neg
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }

    /// `tn / (tn + fp)`, absent when there are no decided negatives.
    pub fn tnr(&self) -> Option<Rational> {
        rate(self.tn, self.tn + self.fp)
    }

    /// `tp / (tp + fn)`, absent when there are no decided positives.
    pub fn tpr(&self) -> Option<Rational> {
        rate(self.tp, self.tp + self.fn_)
    }
}

fn rate(hits: u64, total: u64) -> Option<Rational> {
    (total > 0).then(|| Rational::new(i128::from(hits), i128::from(total)))
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
            fp: self.fp + rhs.fp,
            undecided_pos: self.undecided_pos + rhs.undecided_pos,
            undecided_neg: self.undecided_neg + rhs.undecided_neg,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Tallies `(ground truth, prediction)` pairs.
pub fn compute_confusion<I>(records: I) -> ConfusionCounts
where
    I: IntoIterator<Item = (bool, ProofLabel)>,
{
    let mut counts = ConfusionCounts::default();
    for (gt, predicted) in records {
        counts.record(gt, predicted);
    }
    counts
}

/// Harmonic mean of TPR and TNR; 0 when both are 0.
pub fn balanced_f1(tpr: Rational, tnr: Rational) -> Rational {
    let sum = tpr + tnr;
    if sum == Rational::from_integer(0) {
        return Rational::from_integer(0);
    }
    Rational::from_integer(2) * tpr * tnr / sum
}

/// `input_tokens / input_weight + output_tokens`.
pub fn equivalent_output_tokens(
    usage: TokenUsage,
    input_weight: Rational,
) -> Result<Rational, MetricsError> {
    if input_weight <= Rational::from_integer(0) {
        return Err(MetricsError::NonPositiveWeight);
    }
    Ok(Rational::from_integer(i128::from(usage.input_tokens)) / input_weight
        + Rational::from_integer(i128::from(usage.output_tokens)))
}

fn as_decimal<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match value {
        Some(r) => s.serialize_f64(to_f64(*r)),
        None => s.serialize_none(),
    }
}

fn as_decimal_required<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(to_f64(*value))
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsReport {
    #[serde(serialize_with = "as_decimal")]
    pub tnr: Option<Rational>,
    #[serde(serialize_with = "as_decimal")]
    pub tpr: Option<Rational>,
    #[serde(serialize_with = "as_decimal")]
    pub balanced_f1: Option<Rational>,
    pub counts: ConfusionCounts,
    #[serde(serialize_with = "as_decimal_required")]
    pub equivalent_tokens_total: Rational,
    /// Per record; 0 for an empty report.
    #[serde(serialize_with = "as_decimal_required")]
    pub equivalent_tokens_mean: Rational,
}

impl MetricsReport {
    pub fn new(counts: ConfusionCounts, equivalent_tokens_total: Rational) -> Self {
        let tnr = counts.tnr();
        let tpr = counts.tpr();
        let balanced_f1 = match (tpr, tnr) {
            (Some(tpr), Some(tnr)) => Some(balanced_f1(tpr, tnr)),
            _ => None,
        };
        let records = counts.total();
        let equivalent_tokens_mean = if records == 0 {
            Rational::from_integer(0)
        } else {
            equivalent_tokens_total / Rational::from_integer(i128::from(records))
        };
        Self {
            tnr,
            tpr,
            balanced_f1,
            counts,
            equivalent_tokens_total,
            equivalent_tokens_mean,
        }
    }

    /// Builds a report from `(ground truth, prediction, usage)` triples.
    pub fn from_outcomes<I>(outcomes: I, input_weight: Rational) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (bool, ProofLabel, TokenUsage)>,
    {
        let mut counts = ConfusionCounts::default();
        let mut tokens = Rational::from_integer(0);
        for (gt, predicted, usage) in outcomes {
            counts.record(gt, predicted);
            tokens += equivalent_output_tokens(usage, input_weight)?;
        }
        Ok(Self::new(counts, tokens))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fmt_rate(rate: Option<Rational>) -> String {
    rate.map_or_else(|| "undefined".to_string(), |r| format!("{:.4}", to_f64(r)))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        writeln!(f, "{:<26} {:>12}", "metric", "value")?;
        writeln!(f, "{:<26} {:>12}", "TNR", fmt_rate(self.tnr))?;
        writeln!(f, "{:<26} {:>12}", "TPR", fmt_rate(self.tpr))?;
        writeln!(f, "{:<26} {:>12}", "balanced F1", fmt_rate(self.balanced_f1))?;
        writeln!(f, "{:<26} {:>12}", "tp / fn", format!("{} / {}", c.tp, c.fn_))?;
        writeln!(f, "{:<26} {:>12}", "tn / fp", format!("{} / {}", c.tn, c.fp))?;
        writeln!(
            f,
            "{:<26} {:>12}",
            "undecided (pos / neg)",
            format!("{} / {}", c.undecided_pos, c.undecided_neg)
        )?;
        writeln!(
            f,
            "{:<26} {:>12.1}",
            "equivalent tokens (total)",
            to_f64(self.equivalent_tokens_total)
        )?;
        write!(
            f,
            "{:<26} {:>12.1}",
            "equivalent tokens (mean)",
            to_f64(self.equivalent_tokens_mean)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn confusion_definitions() {
        let c = compute_confusion([(false, ProofLabel::Incorrect)]);
        assert_eq!(c.tn, 1);
        let c = compute_confusion([(true, ProofLabel::Incorrect)]);
        assert_eq!(c.fn_, 1);
        let c = compute_confusion([(true, ProofLabel::Undecided)]);
        assert_eq!((c.undecided_pos, c.tp, c.fn_), (1, 0, 0));
    }

    #[test]
    fn f1_values() {
        assert_eq!(balanced_f1(r(1, 1), r(1, 1)), r(1, 1));
        assert_eq!(balanced_f1(r(1, 1), r(0, 1)), r(0, 1));
        assert_eq!(balanced_f1(r(0, 1), r(0, 1)), r(0, 1));
        assert_eq!(balanced_f1(r(4, 5), r(3, 5)), r(24, 35));
    }

    #[test]
    fn equivalent_tokens() {
        let w = r(8, 1);
        assert_eq!(equivalent_output_tokens(TokenUsage::new(800, 100), w), Ok(r(200, 1)));
        assert_eq!(equivalent_output_tokens(TokenUsage::new(0, 0), w), Ok(r(0, 1)));
        assert_eq!(equivalent_output_tokens(TokenUsage::new(7, 0), w), Ok(r(7, 8)));
        assert_eq!(
            equivalent_output_tokens(TokenUsage::new(7, 0), r(0, 1)),
            Err(MetricsError::NonPositiveWeight)
        );
    }

    #[test]
    fn report_absence_rules() {
        let counts = ConfusionCounts {
            tp: 3,
            ..Default::default()
        };
        let report = MetricsReport::new(counts, r(0, 1));
        assert_eq!(report.tnr, None);
        assert_eq!(report.tpr, Some(r(1, 1)));
        assert_eq!(report.balanced_f1, None);
        assert!(report.to_string().contains("undefined"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(json["tnr"].is_null());
        assert_eq!(json["counts"]["fn"], 0);
    }

    #[test]
    fn report_from_counts() {
        let counts = ConfusionCounts {
            tp: 8,
            fn_: 2,
            tn: 6,
            fp: 4,
            ..Default::default()
        };
        let report = MetricsReport::new(counts, r(400, 1));
        assert_eq!(report.tpr, Some(r(4, 5)));
        assert_eq!(report.tnr, Some(r(3, 5)));
        assert_eq!(report.balanced_f1, Some(r(24, 35)));
        assert_eq!(report.equivalent_tokens_mean, r(20, 1));
    }
}
