//! Verifier backends.
//!
//! A [`Backend`] answers one rendered prompt with one response. Retries,
//! verdict parsing and the in-flight cap live in [`crate::verifier`]; the
//! backends themselves only move text.

mod http;
mod scripted;
mod simulator;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ReviewScope, TokenUsage};
use crate::prompt::Prompt;

pub use http::HttpBackend;
pub use scripted::{ScriptEntry, ScriptError, ScriptedBackend};
pub use simulator::{SimulatorBackend, SimulatorParams, PLANTED_ERROR_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    Medium,
    High,
}

impl std::str::FromStr for ReasoningEffort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            other => Err(format!("unknown reasoning effort `{other}`")),
        }
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// Everything needed to render and send one review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRequest {
    pub problem: String,
    pub full_proof: String,
    pub scope: ReviewScope,
    pub temperature: f64,
    pub model: String,
    pub reasoning_effort: Option<ReasoningEffort>,
}

impl ReviewRequest {
    pub fn new(problem: impl Into<String>, full_proof: impl Into<String>) -> Self {
        Self {
            problem: problem.into(),
            full_proof: full_proof.into(),
            scope: ReviewScope::FullProof,
            temperature: DEFAULT_TEMPERATURE,
            model: String::new(),
            reasoning_effort: None,
        }
    }

    pub fn with_scope(mut self, scope: ReviewScope) -> Self {
        self.scope = scope;
        self
    }
}

/// One backend invocation.
#[derive(Debug, Clone, Copy)]
pub struct BackendCall<'a> {
    pub request: &'a ReviewRequest,
    pub prompt: &'a Prompt,
    pub task_index: usize,
    /// 0 for the first attempt.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub content: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("backend error: {0}")]
    Fatal(String),
}

impl BackendError {
    /// Transport failures and timeouts are retried; everything else aborts.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::Timeout)
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, call: &BackendCall<'_>) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Scripted,
    Simulator,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("http backend requires an endpoint url")]
    MissingEndpoint,
    #[error("max_in_flight must be at least 1")]
    ZeroInFlight,
    #[error("environment variable `{0}` is not set")]
    MissingApiKey(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub retry_limit: u32,
    #[serde(with = "millis")]
    pub retry_backoff_base: Duration,
    #[serde(with = "millis")]
    pub request_timeout: Duration,
    /// Whether the endpoint accepts a `reasoning_effort` field.
    #[serde(default)]
    pub supports_reasoning_effort: bool,
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        Self {
            kind,
            endpoint_url: None,
            api_key_env: "OPENAI_API_KEY".to_string(),
            max_in_flight: 8,
            retry_limit: 2,
            retry_backoff_base: Duration::from_millis(500),
            request_timeout: Duration::from_secs(600),
            supports_reasoning_effort: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_in_flight == 0 {
            return Err(ConfigError::ZeroInFlight);
        }
        if self.kind == BackendKind::Http && self.endpoint_url.is_none() {
            return Err(ConfigError::MissingEndpoint);
        }
        Ok(())
    }
}

/// Rough token estimate (4 bytes per token) for backends without usage reporting.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
