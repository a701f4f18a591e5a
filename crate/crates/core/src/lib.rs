//! Pessimistic verification of mathematical proofs.
//!
//! A proof is handed to several independent reviews, either of the whole
//! proof or of pieces of it, and is declared incorrect as soon as any one
//! review reports an error. The crate provides:
//!
//! - [`model`]: records, verdicts, the strategy-spec grammar and label adapters
//! - [`segment`]: line chunking and bisection schedules
//! - [`prompt`] and [`verdict`]: the review prompts and the verdict-tag parser
//! - [`backend`] and [`verifier`]: HTTP, scripted and simulated reviewers,
//!   retries and the in-flight cap
//! - [`strategy`]: single pass, majority, simple, vertical and progressive
//!   pessimistic verification
//! - [`metrics`]: TNR, TPR, balanced F1 and equivalent-token cost
//! - [`dataset`] and [`runlog`]: JSONL ingestion and resumable run files
//! - [`simulate`]: closed-form rates and Monte-Carlo curves
//!
//! ```
//! use std::sync::Arc;
//! use pverify::backend::{BackendConfig, BackendKind, ScriptedBackend};
//! use pverify::model::{ProblemRecord, ProofLabel};
//! use pverify::strategy::run_simple_pessimistic;
//! use pverify::verifier::Verifier;
//!
//! let backend = ScriptedBackend::from_responses([
//!     "<verification>true</verification>",
//!     "<verification>false</verification> Step 2 divides by zero.",
//!     "<verification>true</verification>",
//! ]);
//! let mut config = BackendConfig::new(BackendKind::Scripted);
//! config.max_in_flight = 1;
//! let verifier = Verifier::new(Arc::new(backend), &config);
//!
//! let record = ProblemRecord {
//!     id: "q1".into(),
//!     problem: "Show that 1 = 1.".into(),
//!     proof: "Step 1.\nStep 2.".into(),
//!     gt_label: false,
//!     source: "demo".into(),
//!     raw_score: None,
//! };
//! let result = run_simple_pessimistic(&record, 3, &verifier).unwrap();
//! assert_eq!(result.verdict.label, ProofLabel::Incorrect);
//! assert_eq!(result.verdict.deciding_review, Some(1));
//! ```

pub mod backend;
pub mod dataset;
pub mod metrics;
pub mod model;
pub mod prompt;
mod seed;
pub mod segment;
pub mod simulate;
pub mod strategy;
pub mod verdict;
pub mod runlog;
pub mod verifier;

pub use model::{
    parse_strategy_spec, ProblemRecord, ProofLabel, ProofVerdict, ReviewVerdict, StrategySpec,
    TokenUsage, Verdict,
};

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/runs.md")]
    mod runs {}
}
