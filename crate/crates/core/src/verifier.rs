//! Submitting reviews: prompt rendering, retries, the in-flight cap and the
//! call log.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::backend::{Backend, BackendCall, BackendConfig, BackendError, ReasoningEffort, ReviewRequest};
use crate::model::{ReviewScope, ReviewVerdict, TokenUsage, Verdict};
use crate::prompt::{render_prompt, PromptError};
use crate::segment::SegmentError;
use crate::verdict::parse_verdict;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    /// A non-retryable backend failure; aborts the run.
    #[error("task {task_index}: {source}")]
    Backend {
        task_index: usize,
        source: BackendError,
    },
}

/// Counting semaphore bounding concurrent backend calls.
#[derive(Debug)]
pub struct Limiter {
    capacity: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
}

impl Limiter {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            in_use: Mutex::new(0),
            freed: Condvar::new(),
            peak: AtomicUsize::new(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Highest number of permits held at once so far.
    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut in_use = self.in_use.lock().expect("limiter lock");
        while *in_use >= self.capacity {
            in_use = self.freed.wait(in_use).expect("limiter lock");
        }
        *in_use += 1;
        self.peak.fetch_max(*in_use, Ordering::SeqCst);
        Permit { limiter: self }
    }
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut in_use = self.limiter.in_use.lock().expect("limiter lock");
        *in_use -= 1;
        self.limiter.freed.notify_one();
    }
}

/// One backend invocation as recorded by the [`CallLog`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallEntry {
    pub task_index: usize,
    /// `None` for a full-proof review, else the chunk's line range.
    pub span: Option<(usize, usize)>,
    pub depth: Option<u32>,
    pub attempt: u32,
}

#[derive(Debug, Default)]
pub struct CallLog {
    entries: Mutex<Vec<CallEntry>>,
}

impl CallLog {
    fn record(&self, entry: CallEntry) {
        self.entries.lock().expect("call log lock").push(entry);
    }

    /// Every backend invocation, in the order they were made.
    pub fn entries(&self) -> Vec<CallEntry> {
        self.entries.lock().expect("call log lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("call log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.lock().expect("call log lock").clear();
    }
}

/// Model settings applied to every request a strategy builds.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewSettings {
    pub model: String,
    pub temperature: f64,
    pub reasoning_effort: Option<ReasoningEffort>,
}

impl Default for ReviewSettings {
    fn default() -> Self {
        Self {
            model: String::new(),
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            reasoning_effort: None,
        }
    }
}

/// Submits reviews to a backend.
///
/// A parse failure or a retryable transport error consumes one attempt;
/// after `retry_limit` retries the review comes back `Invalid`. Each attempt
/// holds a limiter permit, so retries count against `max_in_flight`.
#[derive(Clone)]
pub struct Verifier {
    backend: Arc<dyn Backend>,
    limiter: Arc<Limiter>,
    log: Arc<CallLog>,
    retry_limit: u32,
    backoff_base: Duration,
    settings: ReviewSettings,
}

impl Verifier {
    pub fn new(backend: Arc<dyn Backend>, config: &BackendConfig) -> Self {
        Self {
            backend,
            limiter: Arc::new(Limiter::new(config.max_in_flight)),
            log: Arc::new(CallLog::default()),
            retry_limit: config.retry_limit,
            backoff_base: config.retry_backoff_base,
            settings: ReviewSettings::default(),
        }
    }

    pub fn with_settings(mut self, settings: ReviewSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn settings(&self) -> &ReviewSettings {
        &self.settings
    }

    pub fn call_log(&self) -> &CallLog {
        &self.log
    }

    pub fn limiter(&self) -> &Limiter {
        &self.limiter
    }

    pub fn max_in_flight(&self) -> usize {
        self.limiter.capacity()
    }

    /// A request for `scope` of the given proof with this verifier's settings.
    pub fn request(&self, problem: &str, proof: &str, scope: ReviewScope) -> ReviewRequest {
        ReviewRequest {
            problem: problem.to_string(),
            full_proof: proof.to_string(),
            scope,
            temperature: self.settings.temperature,
            model: self.settings.model.clone(),
            reasoning_effort: self.settings.reasoning_effort,
        }
    }

    pub fn submit_review(
        &self,
        request: &ReviewRequest,
        task_index: usize,
    ) -> Result<ReviewVerdict, VerifyError> {
        let prompt = render_prompt(request)?;
        let mut usage = TokenUsage::ZERO;
        let mut last_raw = String::new();
        let attempts = self.retry_limit + 1;
        for attempt in 0..attempts {
            if attempt > 0 && !self.backoff_base.is_zero() {
                let factor = 1u32.checked_shl(attempt - 1).unwrap_or(u32::MAX);
                std::thread::sleep(self.backoff_base.saturating_mul(factor));
            }
            let call = BackendCall {
                request,
                prompt: &prompt,
                task_index,
                attempt,
            };
            self.log.record(CallEntry {
                task_index,
                span: request.scope.segment().map(|s| (s.start_line, s.end_line)),
                depth: request.scope.segment().map(|s| s.depth),
                attempt,
            });
            let reply = {
                let _permit = self.limiter.acquire();
                self.backend.complete(&call)
            };
            match reply {
                Ok(reply) => {
                    usage += reply.usage;
                    match parse_verdict(&reply.content) {
                        Ok(parsed) => {
                            return Ok(ReviewVerdict {
                                task_index,
                                scope: request.scope.clone(),
                                verdict: parsed.verdict,
                                explanation: parsed.explanation,
                                raw_response: reply.content,
                                usage,
                                attempts: attempt + 1,
                            })
                        }
                        Err(_) => last_raw = reply.content,
                    }
                }
                Err(error) if error.is_retryable() => last_raw = format!("[{error}]"),
                Err(source) => return Err(VerifyError::Backend { task_index, source }),
            }
        }
        Ok(ReviewVerdict {
            task_index,
            scope: request.scope.clone(),
            verdict: Verdict::Invalid,
            explanation: String::new(),
            raw_response: last_raw,
            usage,
            attempts,
        })
    }

    /// Submits a batch concurrently (bounded by `max_in_flight`) and returns
    /// the verdicts sorted by task index.
    ///
    /// On a fatal backend error no further tasks are started and the error of
    /// the lowest failing task index is returned.
    pub fn submit_batch(
        &self,
        tasks: &[(usize, ReviewRequest)],
    ) -> Result<Vec<ReviewVerdict>, VerifyError> {
        let workers = self.max_in_flight().min(tasks.len());
        let mut results: Vec<(usize, Result<ReviewVerdict, VerifyError>)> = if workers <= 1 {
            let mut out = Vec::with_capacity(tasks.len());
            for (index, request) in tasks {
                let result = self.submit_review(request, *index);
                let failed = result.is_err();
                out.push((*index, result));
                if failed {
                    break;
                }
            }
            out
        } else {
            let next = AtomicUsize::new(0);
            let abort = AtomicBool::new(false);
            let collected = Mutex::new(Vec::with_capacity(tasks.len()));
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        if abort.load(Ordering::SeqCst) {
                            break;
                        }
                        let slot = next.fetch_add(1, Ordering::SeqCst);
                        let Some((index, request)) = tasks.get(slot) else {
                            break;
                        };
                        let result = self.submit_review(request, *index);
                        if result.is_err() {
                            abort.store(true, Ordering::SeqCst);
                        }
                        collected.lock().expect("batch lock").push((*index, result));
                    });
                }
            });
            collected.into_inner().expect("batch lock")
        };
        results.sort_by_key(|(index, _)| *index);
        results.into_iter().map(|(_, result)| result).collect()
    }
}
