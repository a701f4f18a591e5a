//! The five verification strategies.
//!
//! Task indices are assigned in dispatch order and are the only thing
//! aggregation looks at besides the verdicts, so completion order never
//! affects a result. Progressive runs number their tasks level by level:
//! the full proof is task 0, its halves tasks 1 and 2, and so on.

use std::time::{Duration, Instant};

use crate::model::{ProblemRecord, ProofVerdict, ReviewScope, ReviewVerdict, StrategySpec, TokenUsage};
use crate::segment::{chunk_by_lines, progressive_schedule};
use crate::verifier::{Verifier, VerifyError};

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRunResult {
    pub verdict: ProofVerdict,
    pub reviews_issued: usize,
    pub usage_total: TokenUsage,
    /// Levels executed by a progressive run.
    pub levels_completed: Option<usize>,
    pub wall_time: Duration,
}

impl StrategyRunResult {
    fn finish(verdict: ProofVerdict, levels_completed: Option<usize>, started: Instant) -> Self {
        let usage_total = verdict.reviews.iter().map(|r| r.usage).sum();
        Self {
            reviews_issued: verdict.reviews.len(),
            verdict,
            usage_total,
            levels_completed,
            wall_time: started.elapsed(),
        }
    }
}

fn full_proof_batch(
    record: &ProblemRecord,
    n: usize,
    verifier: &Verifier,
) -> Result<Vec<ReviewVerdict>, VerifyError> {
    let request = verifier.request(&record.problem, &record.proof, ReviewScope::FullProof);
    let tasks: Vec<_> = (0..n).map(|i| (i, request.clone())).collect();
    verifier.submit_batch(&tasks)
}

/// One full-proof review.
pub fn run_single(record: &ProblemRecord, verifier: &Verifier) -> Result<StrategyRunResult, VerifyError> {
    let started = Instant::now();
    let reviews = full_proof_batch(record, 1, verifier)?;
    Ok(StrategyRunResult::finish(ProofVerdict::pessimistic(reviews), None, started))
}

/// `n` full-proof reviews decided by strict majority of valid votes.
pub fn run_majority(
    record: &ProblemRecord,
    n: usize,
    verifier: &Verifier,
) -> Result<StrategyRunResult, VerifyError> {
    let started = Instant::now();
    let reviews = full_proof_batch(record, n, verifier)?;
    Ok(StrategyRunResult::finish(ProofVerdict::majority(reviews), None, started))
}

/// `n` full-proof reviews; any negative makes the proof incorrect.
pub fn run_simple_pessimistic(
    record: &ProblemRecord,
    n: usize,
    verifier: &Verifier,
) -> Result<StrategyRunResult, VerifyError> {
    let started = Instant::now();
    let reviews = full_proof_batch(record, n, verifier)?;
    Ok(StrategyRunResult::finish(ProofVerdict::pessimistic(reviews), None, started))
}

/// One chunk review per `l`-line chunk, aggregated pessimistically.
pub fn run_vertical(
    record: &ProblemRecord,
    l: usize,
    verifier: &Verifier,
) -> Result<StrategyRunResult, VerifyError> {
    let started = Instant::now();
    let tasks: Vec<_> = chunk_by_lines(&record.proof, l)?
        .into_iter()
        .enumerate()
        .map(|(i, segment)| {
            let scope = ReviewScope::Chunk {
                segment,
                chunk_index: i + 1,
            };
            (i, verifier.request(&record.problem, &record.proof, scope))
        })
        .collect();
    let reviews = verifier.submit_batch(&tasks)?;
    Ok(StrategyRunResult::finish(ProofVerdict::pessimistic(reviews), None, started))
}

/// Level-by-level bisection with pruning.
///
/// Level 0 reviews the whole proof with the single-pass prompt; deeper
/// levels review their segments with the chunk prompt. As soon as a level
/// yields a negative review the run stops and the proof is incorrect.
pub fn run_progressive(
    record: &ProblemRecord,
    n: usize,
    l: usize,
    verifier: &Verifier,
) -> Result<StrategyRunResult, VerifyError> {
    let started = Instant::now();
    let schedule = progressive_schedule(&record.proof, n, l)?;
    let mut reviews = Vec::new();
    let mut next_task = 0;
    let mut levels_completed = 0;
    for level in schedule {
        let tasks: Vec<_> = level
            .into_iter()
            .map(|segment| {
                let scope = if segment.depth == 0 {
                    ReviewScope::FullProof
                } else {
                    ReviewScope::Chunk {
                        chunk_index: segment.index_at_depth + 1,
                        segment,
                    }
                };
                let task = (next_task, verifier.request(&record.problem, &record.proof, scope));
                next_task += 1;
                task
            })
            .collect();
        let level_reviews = verifier.submit_batch(&tasks)?;
        levels_completed += 1;
        let found_error = level_reviews
            .iter()
            .any(|r| r.verdict == crate::model::Verdict::Negative);
        reviews.extend(level_reviews);
        if found_error {
            break;
        }
    }
    Ok(StrategyRunResult::finish(
        ProofVerdict::pessimistic(reviews),
        Some(levels_completed),
        started,
    ))
}

/// Runs whichever strategy `spec` names.
pub fn run_strategy(
    spec: &StrategySpec,
    record: &ProblemRecord,
    verifier: &Verifier,
) -> Result<StrategyRunResult, VerifyError> {
    match *spec {
        StrategySpec::Single => run_single(record, verifier),
        StrategySpec::Majority { n } => run_majority(record, n as usize, verifier),
        StrategySpec::SimplePessimistic { n } => run_simple_pessimistic(record, n as usize, verifier),
        StrategySpec::Vertical { l } => run_vertical(record, l as usize, verifier),
        StrategySpec::Progressive { n, l } => run_progressive(record, n as usize, l as usize, verifier),
    }
}
