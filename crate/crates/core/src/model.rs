//! Domain types shared across the crate.
//!
//! Everything here is an immutable value: records, review verdicts, the
//! aggregated [`ProofVerdict`], and the [`StrategySpec`] grammar that names a
//! verification strategy on the command line.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::segment::Segment;

/// One benchmark item: a problem, a candidate proof and its ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: String,
    pub problem: String,
    pub proof: String,
    /// `true` when the proof is correct.
    pub gt_label: bool,
    /// Dataset name.
    pub source: String,
    /// Score on the dataset's original grading scale, kept for audit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_score: Option<i64>,
}

/// Input/output token counts of one or more backend calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub const ZERO: TokenUsage = TokenUsage {
        input_tokens: 0,
        output_tokens: 0,
    };

    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        Self {
            input_tokens,
            output_tokens,
        }
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            input_tokens: self.input_tokens.saturating_add(rhs.input_tokens),
            output_tokens: self.output_tokens.saturating_add(rhs.output_tokens),
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

impl Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> TokenUsage {
        iter.fold(TokenUsage::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a TokenUsage> for TokenUsage {
    fn sum<I: Iterator<Item = &'a TokenUsage>>(iter: I) -> TokenUsage {
        iter.copied().sum()
    }
}

/// Outcome of a single review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Negative,
    /// No well-formed verdict tag could be extracted after all retries.
    Invalid,
}

/// What a review looked at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReviewScope {
    FullProof,
    Chunk {
        segment: Segment,
        /// The index rendered into the chunk prompt.
        chunk_index: usize,
    },
}

impl ReviewScope {
    pub fn segment(&self) -> Option<&Segment> {
        match self {
            ReviewScope::FullProof => None,
            ReviewScope::Chunk { segment, .. } => Some(segment),
        }
    }
}

/// One verifier response after parsing and retries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    /// Position in the deterministic dispatch order of the run.
    pub task_index: usize,
    pub scope: ReviewScope,
    pub verdict: Verdict,
    /// Stated error for a negative review, minor-issue notes otherwise.
    pub explanation: String,
    pub raw_response: String,
    pub usage: TokenUsage,
    /// Backend attempts consumed, including retries.
    pub attempts: u32,
}

/// Final classification of a proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofLabel {
    Correct,
    Incorrect,
    /// Every issued review was invalid.
    Undecided,
}

impl fmt::Display for ProofLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProofLabel::Correct => "correct",
            ProofLabel::Incorrect => "incorrect",
            ProofLabel::Undecided => "undecided",
        })
    }
}

/// Pessimistic aggregation: any negative wins.
///
/// Returns the label and, for `Incorrect`, the smallest task index among the
/// negative reviews. Invalid reviews are ignored.
pub fn aggregate_pessimistic<I>(verdicts: I) -> (ProofLabel, Option<usize>)
where
    I: IntoIterator<Item = (usize, Verdict)>,
{
    let mut first_negative: Option<usize> = None;
    let mut any_positive = false;
    for (index, verdict) in verdicts {
        match verdict {
            Verdict::Negative => {
                first_negative = Some(first_negative.map_or(index, |f| f.min(index)));
            }
            Verdict::Positive => any_positive = true,
            Verdict::Invalid => {}
        }
    }
    match first_negative {
        Some(index) => (ProofLabel::Incorrect, Some(index)),
        None if any_positive => (ProofLabel::Correct, None),
        None => (ProofLabel::Undecided, None),
    }
}

/// Majority aggregation over valid reviews; a tie resolves to `Correct`.
pub fn aggregate_majority<I>(verdicts: I) -> (ProofLabel, Option<usize>)
where
    I: IntoIterator<Item = (usize, Verdict)>,
{
    let mut positives = 0usize;
    let mut negatives = 0usize;
    let mut first_negative: Option<usize> = None;
    for (index, verdict) in verdicts {
        match verdict {
            Verdict::Negative => {
                negatives += 1;
                first_negative = Some(first_negative.map_or(index, |f| f.min(index)));
            }
            Verdict::Positive => positives += 1,
            Verdict::Invalid => {}
        }
    }
    if positives + negatives == 0 {
        (ProofLabel::Undecided, None)
    } else if negatives > positives {
        (ProofLabel::Incorrect, first_negative)
    } else {
        (ProofLabel::Correct, None)
    }
}

/// Aggregated verdict for one proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofVerdict {
    pub label: ProofLabel,
    /// Task index of the first negative review, present iff `Incorrect`.
    pub deciding_review: Option<usize>,
    pub reviews: Vec<ReviewVerdict>,
    pub total_reviews_issued: usize,
}

impl ProofVerdict {
    pub fn pessimistic(reviews: Vec<ReviewVerdict>) -> Self {
        let (label, deciding_review) =
            aggregate_pessimistic(reviews.iter().map(|r| (r.task_index, r.verdict)));
        Self::assemble(label, deciding_review, reviews)
    }

    pub fn majority(reviews: Vec<ReviewVerdict>) -> Self {
        let (label, deciding_review) =
            aggregate_majority(reviews.iter().map(|r| (r.task_index, r.verdict)));
        Self::assemble(label, deciding_review, reviews)
    }

    fn assemble(
        label: ProofLabel,
        deciding_review: Option<usize>,
        mut reviews: Vec<ReviewVerdict>,
    ) -> Self {
        reviews.sort_by_key(|r| r.task_index);
        let total_reviews_issued = reviews.len();
        Self {
            label,
            deciding_review,
            reviews,
            total_reviews_issued,
        }
    }

    /// The review that decided an `Incorrect` verdict.
    pub fn deciding(&self) -> Option<&ReviewVerdict> {
        let index = self.deciding_review?;
        self.reviews.iter().find(|r| r.task_index == index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Single,
    Majority,
    SimplePessimistic,
    Vertical,
    Progressive,
}

/// A parsed strategy identifier such as `pes@8` or `prog@3/6`.
///
/// `n` is a review count for majority and simple pessimistic verification
/// and the maximum number of levels for progressive verification. `l` is
/// the chunk length in lines for vertical verification and the minimum
/// segment length for progressive verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategySpec {
    Single,
    Majority { n: u32 },
    SimplePessimistic { n: u32 },
    Vertical { l: u32 },
    Progressive { n: u32, l: u32 },
}

impl StrategySpec {
    pub fn kind(&self) -> StrategyKind {
        match self {
            StrategySpec::Single => StrategyKind::Single,
            StrategySpec::Majority { .. } => StrategyKind::Majority,
            StrategySpec::SimplePessimistic { .. } => StrategyKind::SimplePessimistic,
            StrategySpec::Vertical { .. } => StrategyKind::Vertical,
            StrategySpec::Progressive { .. } => StrategyKind::Progressive,
        }
    }

    pub fn n(&self) -> Option<u32> {
        match *self {
            StrategySpec::Majority { n }
            | StrategySpec::SimplePessimistic { n }
            | StrategySpec::Progressive { n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn l(&self) -> Option<u32> {
        match *self {
            StrategySpec::Vertical { l } | StrategySpec::Progressive { l, .. } => Some(l),
            _ => None,
        }
    }

    /// The strategy name without parameters, as used in curve output.
    pub fn family(&self) -> &'static str {
        match self {
            StrategySpec::Single => "single",
            StrategySpec::Majority { .. } => "maj",
            StrategySpec::SimplePessimistic { .. } => "pes",
            StrategySpec::Vertical { .. } => "vp",
            StrategySpec::Progressive { .. } => "prog",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid strategy spec at `{token}`: {reason}")]
pub struct StrategyParseError {
    /// The offending part of the input.
    pub token: String,
    pub reason: &'static str,
}

fn parse_param(token: &str) -> Result<u32, StrategyParseError> {
    let err = |reason| StrategyParseError {
        token: token.to_string(),
        reason,
    };
    if token.is_empty() {
        return Err(err("missing parameter"));
    }
    if !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err("parameter must be a decimal integer"));
    }
    let mut value: u32 = 0;
    for b in token.bytes() {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(u32::from(b - b'0')))
            .ok_or_else(|| err("parameter overflows"))?;
    }
    if value == 0 {
        return Err(err("parameter must be positive"));
    }
    Ok(value)
}

/// Parse `single`, `maj@N`, `pes@N`, `vp@L` or `prog@N/L`.
///
/// `progressive@N/L` is accepted as an alias of `prog@N/L`.
pub fn parse_strategy_spec(input: &str) -> Result<StrategySpec, StrategyParseError> {
    if input == "single" {
        return Ok(StrategySpec::Single);
    }
    let Some((name, params)) = input.split_once('@') else {
        return Err(StrategyParseError {
            token: input.to_string(),
            reason: "unknown strategy",
        });
    };
    let one_param = |params: &str| {
        if params.contains('/') {
            Err(StrategyParseError {
                token: params.to_string(),
                reason: "strategy takes a single parameter",
            })
        } else {
            parse_param(params)
        }
    };
    match name {
        "maj" => Ok(StrategySpec::Majority {
            n: one_param(params)?,
        }),
        "pes" => Ok(StrategySpec::SimplePessimistic {
            n: one_param(params)?,
        }),
        "vp" => Ok(StrategySpec::Vertical {
            l: one_param(params)?,
        }),
        "prog" | "progressive" => {
            let Some((n, l)) = params.split_once('/') else {
                return Err(StrategyParseError {
                    token: params.to_string(),
                    reason: "progressive strategy needs N/L",
                });
            };
            Ok(StrategySpec::Progressive {
                n: parse_param(n)?,
                l: parse_param(l)?,
            })
        }
        _ => Err(StrategyParseError {
            token: name.to_string(),
            reason: "unknown strategy",
        }),
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Single => f.write_str("single"),
            StrategySpec::Majority { n } => write!(f, "maj@{n}"),
            StrategySpec::SimplePessimistic { n } => write!(f, "pes@{n}"),
            StrategySpec::Vertical { l } => write!(f, "vp@{l}"),
            StrategySpec::Progressive { n, l } => write!(f, "prog@{n}/{l}"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = StrategyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_strategy_spec(s)
    }
}

impl Serialize for StrategySpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategySpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("unknown label adapter `{0}`")]
    UnknownAdapter(String),
    #[error("score {score} outside the range {min}..={max} of adapter `{adapter}`")]
    OutOfRange {
        adapter: &'static str,
        score: i64,
        min: i64,
        max: i64,
    },
}

/// Maps a dataset's raw grade onto the binary ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LabelAdapter {
    /// 0..=7 grading scale; only a full 7 counts as correct.
    SevenPoint,
    /// 0/1 labels, mapped by identity.
    Binary,
}

impl LabelAdapter {
    pub const ALL: [LabelAdapter; 2] = [LabelAdapter::SevenPoint, LabelAdapter::Binary];

    pub fn name(self) -> &'static str {
        match self {
            LabelAdapter::SevenPoint => "imo-grading",
            LabelAdapter::Binary => "binary",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, LabelError> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| LabelError::UnknownAdapter(name.to_string()))
    }

    pub fn range(self) -> (i64, i64) {
        match self {
            LabelAdapter::SevenPoint => (0, 7),
            LabelAdapter::Binary => (0, 1),
        }
    }

    pub fn label(self, score: i64) -> Result<bool, LabelError> {
        let (min, max) = self.range();
        if score < min || score > max {
            return Err(LabelError::OutOfRange {
                adapter: self.name(),
                score,
                min,
                max,
            });
        }
        Ok(score == max)
    }
}

impl TryFrom<String> for LabelAdapter {
    type Error = LabelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::from_name(&value)
    }
}

impl From<LabelAdapter> for String {
    fn from(value: LabelAdapter) -> Self {
        value.name().to_string()
    }
}

/// Ground-truth label for `raw_score` under the adapter registered as `source`.
pub fn map_raw_score_to_label(source: &str, raw_score: i64) -> Result<bool, LabelError> {
    LabelAdapter::from_name(source)?.label(raw_score)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_forms() {
        assert_eq!(
            parse_strategy_spec("prog@3/6").unwrap(),
            StrategySpec::Progressive { n: 3, l: 6 }
        );
        assert_eq!(parse_strategy_spec("single").unwrap(), StrategySpec::Single);
        assert_eq!(
            parse_strategy_spec("pes@8").unwrap(),
            StrategySpec::SimplePessimistic { n: 8 }
        );
        assert_eq!(
            parse_strategy_spec("progressive@3/6").unwrap(),
            StrategySpec::Progressive { n: 3, l: 6 }
        );
    }

    #[test]
    fn rejects_bad_forms_naming_the_token() {
        let err = parse_strategy_spec("pes@0").unwrap_err();
        assert_eq!(err.token, "0");
        let err = parse_strategy_spec("vote@3").unwrap_err();
        assert_eq!(err.token, "vote");
        let err = parse_strategy_spec("maj@99999999999").unwrap_err();
        assert_eq!(err.token, "99999999999");
        let err = parse_strategy_spec("prog@3").unwrap_err();
        assert_eq!(err.token, "3");
        let err = parse_strategy_spec("prog@3/x").unwrap_err();
        assert_eq!(err.token, "x");
        assert!(parse_strategy_spec("vp@6/2").is_err());
        assert!(parse_strategy_spec("pes@-1").is_err());
        assert!(parse_strategy_spec("").is_err());
        assert!(parse_strategy_spec("single@1").is_err());
    }

    #[test]
    fn seven_point_adapter() {
        assert!(map_raw_score_to_label("imo-grading", 7).unwrap());
        assert!(!map_raw_score_to_label("imo-grading", 6).unwrap());
        assert!(map_raw_score_to_label("binary", 1).unwrap());
        assert!(!map_raw_score_to_label("binary", 0).unwrap());
        assert!(matches!(
            map_raw_score_to_label("imo-grading", 8),
            Err(LabelError::OutOfRange { .. })
        ));
        assert!(matches!(
            map_raw_score_to_label("nope", 1),
            Err(LabelError::UnknownAdapter(_))
        ));
    }

    #[test]
    fn majority_tie_is_correct() {
        use Verdict::*;
        let v = [(0, Positive), (1, Negative)];
        assert_eq!(aggregate_majority(v), (ProofLabel::Correct, None));
        let v = [(0, Negative), (1, Negative), (2, Positive)];
        assert_eq!(aggregate_majority(v), (ProofLabel::Incorrect, Some(0)));
        let v = [(0, Invalid), (1, Invalid)];
        assert_eq!(aggregate_majority(v), (ProofLabel::Undecided, None));
    }

    #[test]
    fn usage_adds_componentwise() {
        let total: TokenUsage = [TokenUsage::new(3, 4), TokenUsage::new(10, 1)].iter().sum();
        assert_eq!(total, TokenUsage::new(13, 5));
    }
}
