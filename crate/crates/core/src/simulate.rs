//! Closed-form ensemble rates and Monte-Carlo curves.
//!
//! Reviews are independent Bernoulli trials: a full-proof review of an
//! incorrect proof is negative with probability `p_detect`, any review of
//! error-free material with probability `p_false_alarm`. The Monte-Carlo
//! driver pushes synthetic proofs through the regular strategy runners
//! against a [`SimulatorBackend`], so the curves exercise the same code as a
//! live run.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendConfig, BackendKind, SimulatorBackend, SimulatorParams, PLANTED_ERROR_MARKER};
use crate::metrics::{balanced_f1, equivalent_output_tokens, to_f64, ConfusionCounts, Rational};
use crate::model::{ProblemRecord, StrategySpec};
use crate::seed::mix;
use crate::strategy::run_strategy;
use crate::verifier::Verifier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub p_detect: f64,
    pub p_false_alarm: f64,
    pub n: u32,
}

/// `1 - (1 - p_detect)^n`: chance at least one of `n` reviews flags an
/// incorrect proof.
pub fn expected_tnr_pessimistic(model: &EnsembleModel) -> f64 {
    1.0 - (1.0 - model.p_detect).powi(model.n as i32)
}

/// `(1 - p_false_alarm)^n`: chance no review flags a correct proof.
pub fn expected_tpr_pessimistic(model: &EnsembleModel) -> f64 {
    (1.0 - model.p_false_alarm).powi(model.n as i32)
}

/// Chance that negatives strictly outnumber positives among `n` reviews,
/// each negative with probability `p`.
fn majority_negative(p: f64, n: u32) -> f64 {
    let mut total = 0.0;
    let mut coefficient = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            coefficient *= f64::from(n - k + 1) / f64::from(k);
        }
        if 2 * k > n {
            total += coefficient * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        }
    }
    total
}

pub fn expected_tnr_majority(model: &EnsembleModel) -> f64 {
    majority_negative(model.p_detect, model.n)
}

pub fn expected_tpr_majority(model: &EnsembleModel) -> f64 {
    1.0 - majority_negative(model.p_false_alarm, model.n)
}

/// A proof of `lines` numbered steps, with the marker on `error_line`.
pub fn synthetic_proof(lines: usize, error_line: Option<usize>) -> String {
    (0..lines.max(1))
        .map(|i| {
            if Some(i) == error_line {
                format!("Step {}: {PLANTED_ERROR_MARKER} the bound is applied in the wrong direction.", i + 1)
            } else {
                format!("Step {}: follows from the previous step.", i + 1)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    /// Trials per class; each trial verifies one correct and one incorrect proof.
    pub trials: usize,
    pub seed: u64,
    pub proof_lines: usize,
    pub input_weight: Rational,
    /// Defaults to the model's `p_detect`.
    pub p_detect_in_chunk: Option<f64>,
}

impl MonteCarloConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            proof_lines: 48,
            input_weight: Rational::from_integer(crate::metrics::DEFAULT_INPUT_WEIGHT),
            p_detect_in_chunk: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub strategy: StrategySpec,
    pub tnr: f64,
    pub tpr: f64,
    pub f1: f64,
    pub mean_reviews: f64,
    pub mean_equivalent_tokens: f64,
    pub counts: ConfusionCounts,
    /// Reviews reported by the strategy runners.
    pub reviews_issued: usize,
    /// Backend invocations recorded by the verifiers' call logs.
    pub backend_calls: usize,
}

#[derive(Default)]
struct Tally {
    counts: ConfusionCounts,
    reviews: usize,
    calls: usize,
    tokens: Rational,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.counts += other.counts;
        self.reviews += other.reviews;
        self.calls += other.calls;
        self.tokens += other.tokens;
        self
    }
}

fn run_one(
    strategy: &StrategySpec,
    params: SimulatorParams,
    proof: String,
    error_line: Option<usize>,
    input_weight: Rational,
) -> Tally {
    let mut backend = SimulatorBackend::new(params);
    backend.register(proof.clone(), error_line);
    let mut config = BackendConfig::new(BackendKind::Simulator);
    config.max_in_flight = 1;
    config.retry_limit = 0;
    config.retry_backoff_base = Duration::ZERO;
    let verifier = Verifier::new(Arc::new(backend), &config);
    let record = ProblemRecord {
        id: String::new(),
        problem: "Prove the synthetic statement.".into(),
        proof,
        gt_label: error_line.is_none(),
        source: "simulation".into(),
        raw_score: None,
    };
    let result = run_strategy(strategy, &record, &verifier).expect("simulated runs cannot fail");
    let mut counts = ConfusionCounts::default();
    counts.record(record.gt_label, result.verdict.label);
    Tally {
        counts,
        reviews: result.reviews_issued,
        calls: verifier.call_log().len(),
        tokens: equivalent_output_tokens(result.usage_total, input_weight)
            .expect("weight validated"),
    }
}

/// Empirical rates of `strategy` under `model` over `config.trials`
/// incorrect and as many correct synthetic proofs.
///
/// Every trial derives its own seed from `(config.seed, class, trial)`, so
/// the result does not depend on how trials are scheduled.
pub fn monte_carlo_curve(model: &EnsembleModel, strategy: &StrategySpec, config: &MonteCarloConfig) -> CurvePoint {
    let trials = config.trials.max(1);
    let lines = config.proof_lines.max(1);
    let correct_proof = synthetic_proof(lines, None);
    let tally = (0..2 * trials)
        .into_par_iter()
        .map(|i| {
            let incorrect = i < trials;
            let trial_seed = mix(&[config.seed, u64::from(incorrect), i as u64]);
            let mut params = SimulatorParams::new(model.p_detect, model.p_false_alarm, trial_seed);
            params.p_detect_in_chunk = config.p_detect_in_chunk.unwrap_or(model.p_detect);
            if incorrect {
                let error_line = ChaCha8Rng::seed_from_u64(trial_seed).gen_range(0..lines);
                let proof = synthetic_proof(lines, Some(error_line));
                run_one(strategy, params, proof, Some(error_line), config.input_weight)
            } else {
                run_one(strategy, params, correct_proof.clone(), None, config.input_weight)
            }
        })
        .reduce(Tally::default, Tally::merge);

    let zero = Rational::from_integer(0);
    let tnr = tally.counts.tnr().unwrap_or(zero);
    let tpr = tally.counts.tpr().unwrap_or(zero);
    let runs = (2 * trials) as f64;
    CurvePoint {
        strategy: *strategy,
        tnr: to_f64(tnr),
        tpr: to_f64(tpr),
        f1: to_f64(balanced_f1(tpr, tnr)),
        mean_reviews: tally.reviews as f64 / runs,
        mean_equivalent_tokens: to_f64(tally.tokens) / runs,
        counts: tally.counts,
        reviews_issued: tally.reviews,
        backend_calls: tally.calls,
    }
}

/// Budgets 1, 2, 4, 8 for majority and simple pessimistic, chunk sizes
/// 48 down to 6 for vertical, and 1 to 4 levels at floor 6 for progressive.
pub fn default_grid() -> Vec<StrategySpec> {
    let mut grid = Vec::new();
    for n in [1, 2, 4, 8] {
        grid.push(StrategySpec::Majority { n });
    }
    for n in [1, 2, 4, 8] {
        grid.push(StrategySpec::SimplePessimistic { n });
    }
    for l in [48, 24, 12, 6] {
        grid.push(StrategySpec::Vertical { l });
    }
    for n in [1, 2, 3, 4] {
        grid.push(StrategySpec::Progressive { n, l: 6 });
    }
    grid
}

fn budget(spec: &StrategySpec) -> String {
    match *spec {
        StrategySpec::Single => "1".into(),
        StrategySpec::Majority { n } | StrategySpec::SimplePessimistic { n } => n.to_string(),
        StrategySpec::Vertical { l } => l.to_string(),
        StrategySpec::Progressive { n, l } => format!("{n}/{l}"),
    }
}

pub const CURVE_CSV_HEADER: &str = "strategy,n_or_l,tnr,tpr,f1,mean_reviews,mean_equivalent_tokens";

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            p.strategy.family(),
            budget(&p.strategy),
            p.tnr,
            p.tpr,
            p.f1,
            p.mean_reviews,
            p.mean_equivalent_tokens
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let m = |p, q, n| EnsembleModel {
            p_detect: p,
            p_false_alarm: q,
            n,
        };
        assert!((expected_tnr_pessimistic(&m(0.3, 0.0, 1)) - 0.3).abs() < 1e-12);
        assert!((expected_tnr_pessimistic(&m(0.3, 0.0, 8)) - 0.94235199).abs() < 1e-12);
        assert_eq!(expected_tnr_pessimistic(&m(1.0, 0.0, 5)), 1.0);
        assert_eq!(expected_tpr_pessimistic(&m(0.3, 0.0, 5)), 1.0);
        assert!((expected_tpr_pessimistic(&m(0.3, 0.05, 8)) - 0.6634204312890625).abs() < 1e-12);
        assert_eq!(expected_tpr_pessimistic(&m(0.3, 1.0, 1)), 0.0);
        assert!((expected_tnr_majority(&m(0.3, 0.0, 9)) - 0.09880866).abs() < 1e-12);
    }

    #[test]
    fn synthetic_proof_shape() {
        let proof = synthetic_proof(5, Some(3));
        let lines: Vec<_> = proof.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[3].contains(PLANTED_ERROR_MARKER));
        assert!(!synthetic_proof(5, None).contains(PLANTED_ERROR_MARKER));
    }

    #[test]
    fn csv_layout() {
        let point = monte_carlo_curve(
            &EnsembleModel {
                p_detect: 0.5,
                p_false_alarm: 0.0,
                n: 2,
            },
            &StrategySpec::Progressive { n: 2, l: 6 },
            &MonteCarloConfig::new(10, 1),
        );
        let mut out = Vec::new();
        write_curve_csv(&[point], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let rows: Vec<_> = text.lines().collect();
        assert_eq!(rows[0], CURVE_CSV_HEADER);
        assert!(rows[1].starts_with("prog,2/6,"));
    }
}
