use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{estimate_tokens, Backend, BackendCall, BackendError, BackendReply};
use crate::model::{ReviewScope, TokenUsage};
use crate::seed::{fnv1a, mix};

/// A proof line containing this marker is where a simulated error lives.
pub const PLANTED_ERROR_MARKER: &str = "[planted error]";

/// Bernoulli reviewer model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatorParams {
    /// Chance a full-proof review of an incorrect proof is negative.
    pub p_detect: f64,
    /// Chance any review of an error-free proof or chunk is negative.
    pub p_false_alarm: f64,
    /// Line holding the error; when unset, taken from registered truth or
    /// from a line carrying [`PLANTED_ERROR_MARKER`].
    pub chunk_error_location: Option<usize>,
    /// Chance a review of the chunk holding the error is negative.
    pub p_detect_in_chunk: f64,
    pub seed: u64,
}

impl SimulatorParams {
    pub fn new(p_detect: f64, p_false_alarm: f64, seed: u64) -> Self {
        Self {
            p_detect,
            p_false_alarm,
            chunk_error_location: None,
            p_detect_in_chunk: p_detect,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_detect", self.p_detect),
            ("p_false_alarm", self.p_false_alarm),
            ("p_detect_in_chunk", self.p_detect_in_chunk),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }
}

/// Stochastic reviewer whose draws depend only on the seed, the request and
/// the (task index, attempt) pair, so results do not depend on scheduling.
pub struct SimulatorBackend {
    params: SimulatorParams,
    truth: HashMap<String, Option<usize>>,
}

impl SimulatorBackend {
    pub fn new(params: SimulatorParams) -> Self {
        Self {
            params,
            truth: HashMap::new(),
        }
    }

    /// Declares the error line of `proof` (`None` for a correct proof).
    pub fn register(&mut self, proof: impl Into<String>, error_line: Option<usize>) {
        self.truth.insert(proof.into(), error_line);
    }

    pub fn params(&self) -> &SimulatorParams {
        &self.params
    }

    fn error_line(&self, proof: &str) -> Option<usize> {
        if let Some(line) = self.truth.get(proof) {
            return *line;
        }
        self.params.chunk_error_location.or_else(|| {
            proof
                .split('\n')
                .position(|line| line.contains(PLANTED_ERROR_MARKER))
        })
    }
}

impl Backend for SimulatorBackend {
    fn complete(&self, call: &BackendCall<'_>) -> Result<BackendReply, BackendError> {
        let request = call.request;
        let error_line = self.error_line(&request.full_proof);
        let p_negative = match (&request.scope, error_line) {
            (ReviewScope::FullProof, Some(_)) => self.params.p_detect,
            (ReviewScope::Chunk { segment, .. }, Some(line)) if segment.contains_line(line) => {
                self.params.p_detect_in_chunk
            }
            _ => self.params.p_false_alarm,
        };
        let stream = mix(&[
            self.params.seed,
            fnv1a(request.problem.as_bytes()),
            fnv1a(request.full_proof.as_bytes()),
            call.task_index as u64,
            u64::from(call.attempt),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let negative = rng.gen_bool(p_negative.clamp(0.0, 1.0));
        let content = if negative {
            let (start, end) = match &request.scope {
                ReviewScope::FullProof => (0, request.full_proof.split('\n').count()),
                ReviewScope::Chunk { segment, .. } => (segment.start_line, segment.end_line),
            };
            format!(
                "<verification>false</verification> Simulated reviewer found a critical error in lines {start}..{end}."
            )
        } else {
            "<verification>true</verification>".to_string()
        };
        let usage = TokenUsage::new(
            estimate_tokens(&call.prompt.system) + estimate_tokens(&call.prompt.user),
            estimate_tokens(&content),
        );
        Ok(BackendReply { content, usage })
    }
}
