use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use super::{estimate_tokens, Backend, BackendCall, BackendError, BackendReply};
use crate::model::TokenUsage;

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptEntry {
    Response {
        content: String,
        /// Reported usage; estimated from text length when absent.
        usage: Option<TokenUsage>,
    },
    Error(BackendError),
}

impl ScriptEntry {
    pub fn text(content: impl Into<String>) -> Self {
        ScriptEntry::Response {
            content: content.into(),
            usage: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading script: {0}")]
    Io(#[from] std::io::Error),
    #[error("script line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptLine {
    Text(String),
    Object {
        #[serde(default)]
        response: Option<String>,
        #[serde(default)]
        input_tokens: Option<u64>,
        #[serde(default)]
        output_tokens: Option<u64>,
        #[serde(default)]
        error: Option<String>,
    },
}

fn parse_line(line_no: usize, line: &str) -> Result<ScriptEntry, ScriptError> {
    let malformed = |message: String| ScriptError::Malformed {
        line: line_no,
        message,
    };
    let parsed: ScriptLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    match parsed {
        ScriptLine::Text(content) => Ok(ScriptEntry::text(content)),
        ScriptLine::Object {
            error: Some(kind), ..
        } => {
            let error = match kind.as_str() {
                "transport" => BackendError::Transport("scripted transport failure".into()),
                "timeout" => BackendError::Timeout,
                "auth" => BackendError::Auth("scripted authentication failure".into()),
                "fatal" => BackendError::Fatal("scripted fatal failure".into()),
                other => return Err(malformed(format!("unknown error kind `{other}`"))),
            };
            Ok(ScriptEntry::Error(error))
        }
        ScriptLine::Object {
            response: Some(content),
            input_tokens,
            output_tokens,
            ..
        } => {
            let usage = match (input_tokens, output_tokens) {
                (None, None) => None,
                (i, o) => Some(TokenUsage::new(i.unwrap_or(0), o.unwrap_or(0))),
            };
            Ok(ScriptEntry::Response { content, usage })
        }
        ScriptLine::Object { .. } => Err(malformed("expected `response` or `error`".into())),
    }
}

enum Script {
    Fifo(Mutex<VecDeque<ScriptEntry>>),
    /// Per task index, one entry per attempt.
    Keyed(HashMap<usize, Vec<ScriptEntry>>),
}

/// Replays canned responses.
///
/// In FIFO mode entries are handed out in call order, which is only
/// deterministic when calls are issued one at a time. Keyed mode answers by
/// task index and attempt, and can add per-task delays to shuffle
/// completion order under concurrency.
pub struct ScriptedBackend {
    script: Script,
    delays: HashMap<usize, Duration>,
    invocations: AtomicUsize,
}

impl ScriptedBackend {
    pub fn fifo(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        Self::with_script(Script::Fifo(Mutex::new(entries.into_iter().collect())))
    }

    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::fifo(responses.into_iter().map(ScriptEntry::text))
    }

    pub fn keyed(entries: impl IntoIterator<Item = (usize, Vec<ScriptEntry>)>) -> Self {
        Self::with_script(Script::Keyed(entries.into_iter().collect()))
    }

    /// Loads a JSONL script: each line is a JSON string, or an object with
    /// `response` (plus optional `input_tokens`/`output_tokens`) or `error`
    /// (`transport`, `timeout`, `auth`, `fatal`). Blank lines are skipped.
    pub fn from_jsonl_str(text: &str) -> Result<Self, ScriptError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| parse_line(i + 1, line))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::fifo(entries))
    }

    pub fn from_jsonl_file(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        Self::from_jsonl_str(&std::fs::read_to_string(path)?)
    }

    fn with_script(script: Script) -> Self {
        Self {
            script,
            delays: HashMap::new(),
            invocations: AtomicUsize::new(0),
        }
    }

    pub fn with_delays(mut self, delays: impl IntoIterator<Item = (usize, Duration)>) -> Self {
        self.delays = delays.into_iter().collect();
        self
    }

    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        match &self.script {
            Script::Fifo(queue) => queue.lock().expect("script lock").len(),
            Script::Keyed(map) => map.values().map(Vec::len).sum(),
        }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, call: &BackendCall<'_>) -> Result<BackendReply, BackendError> {
        self.invocations.fetch_add(1, Ordering::SeqCst);
        if let Some(delay) = self.delays.get(&call.task_index) {
            std::thread::sleep(*delay);
        }
        let entry = match &self.script {
            Script::Fifo(queue) => queue.lock().expect("script lock").pop_front(),
            Script::Keyed(map) => map
                .get(&call.task_index)
                .and_then(|entries| entries.get(call.attempt as usize))
                .cloned(),
        };
        match entry {
            None => Err(BackendError::Fatal(format!(
                "script exhausted at task {} attempt {}",
                call.task_index, call.attempt
            ))),
            Some(ScriptEntry::Error(error)) => Err(error),
            Some(ScriptEntry::Response { content, usage }) => {
                let usage = usage.unwrap_or_else(|| {
                    TokenUsage::new(
                        estimate_tokens(&call.prompt.system) + estimate_tokens(&call.prompt.user),
                        estimate_tokens(&content),
                    )
                });
                Ok(BackendReply { content, usage })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_forms() {
        let backend = ScriptedBackend::from_jsonl_str(
            "\"<verification>true</verification>\"\n\n{\"response\":\"x\",\"input_tokens\":5}\n{\"error\":\"auth\"}\n",
        )
        .unwrap();
        assert_eq!(backend.remaining(), 3);
        assert!(matches!(
            ScriptedBackend::from_jsonl_str("{\"error\":\"boom\"}"),
            Err(ScriptError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            ScriptedBackend::from_jsonl_str("\"ok\"\nnot json"),
            Err(ScriptError::Malformed { line: 2, .. })
        ));
    }
}
