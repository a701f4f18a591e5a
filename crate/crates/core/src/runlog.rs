//! Run files: append-only JSONL with a header line followed by one
//! [`RunRecord`] per verified proof.
//!
//! Every record is flushed as soon as it is written, so an interrupted run
//! leaves a valid prefix. Readers drop an unterminated trailing line that
//! does not parse.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ProblemRecord, ProofLabel, ReviewVerdict, StrategySpec, TokenUsage};
use crate::strategy::StrategyRunResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Source of timestamps for run records.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances by `step` on every reading.
pub struct SteppingClock {
    start: DateTime<Utc>,
    step: TimeDelta,
    ticks: AtomicU64,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: TimeDelta) -> Self {
        Self {
            start,
            step,
            ticks: AtomicU64::new(0),
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let tick = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + self.step * (tick as i32)
    }
}

/// Case-study classification of a false negative's stated error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FnAnnotation {
    Critical,
    Minor,
    Nonsense,
}

impl std::str::FromStr for FnAnnotation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "critical" => Ok(Self::Critical),
            "minor" => Ok(Self::Minor),
            "nonsense" => Ok(Self::Nonsense),
            _ => Err(format!("unknown annotation `{s}` (expected Critical, Minor or Nonsense)")),
        }
    }
}

impl std::fmt::Display for FnAnnotation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema_version: u32,
    pub strategy: StrategySpec,
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub record_id: String,
    pub strategy: StrategySpec,
    pub model: String,
    pub gt_label: bool,
    pub verdict: ProofLabel,
    pub deciding_explanation: Option<String>,
    pub reviews: Vec<ReviewVerdict>,
    pub usage_total: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels_completed: Option<usize>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fn_annotation: Option<FnAnnotation>,
}

impl RunRecord {
    pub fn from_result(
        record: &ProblemRecord,
        strategy: StrategySpec,
        model: &str,
        result: StrategyRunResult,
        started_at: DateTime<Utc>,
        finished_at: DateTime<Utc>,
    ) -> Self {
        let deciding_explanation = result.verdict.deciding().map(|r| r.explanation.clone());
        Self {
            record_id: record.id.clone(),
            strategy,
            model: model.to_string(),
            gt_label: record.gt_label,
            verdict: result.verdict.label,
            deciding_explanation,
            reviews: result.verdict.reviews,
            usage_total: result.usage_total,
            levels_completed: result.levels_completed,
            started_at,
            finished_at,
            fn_annotation: None,
        }
    }

    pub fn is_false_negative(&self) -> bool {
        self.gt_label && self.verdict == ProofLabel::Incorrect
    }

    pub fn is_false_positive(&self) -> bool {
        !self.gt_label && self.verdict == ProofLabel::Correct
    }

    /// Attaches an annotation; only false negatives can carry one.
    pub fn annotate(&mut self, annotation: FnAnnotation) -> Result<(), RunLogError> {
        if !self.is_false_negative() {
            return Err(RunLogError::NotFalseNegative(self.record_id.clone()));
        }
        self.fn_annotation = Some(annotation);
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RunLine {
    Header(RunHeader),
    Record(Box<RunRecord>),
}

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: schema version {found}, expected {SCHEMA_VERSION}")]
    SchemaVersion { path: PathBuf, found: u32 },
    #[error("{path}: run file is for {found}, not {expected}")]
    HeaderMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("{path}: duplicate record `{id}` for {strategy} / {model}")]
    DuplicateRecord {
        path: PathBuf,
        id: String,
        strategy: StrategySpec,
        model: String,
    },
    #[error("record `{0}` is not a false negative")]
    NotFalseNegative(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunLogError + '_ {
    move |source| RunLogError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parsed contents of a run file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunFile {
    pub header: Option<RunHeader>,
    pub records: Vec<RunRecord>,
    /// Whether an unterminated, unparseable trailing line was dropped.
    pub truncated_tail: bool,
}

/// Splits `text` into complete lines, returning the byte length of the
/// valid prefix.
fn parse_run_text(path: &Path, text: &str) -> Result<(RunFile, usize), RunLogError> {
    let mut file = RunFile::default();
    let mut seen = HashSet::new();
    let mut offset = 0;
    let mut valid_len = 0;
    for (i, chunk) in text.split_inclusive('\n').enumerate() {
        let line_no = i + 1;
        let terminated = chunk.ends_with('\n');
        let line = chunk.trim_end_matches(['\n', '\r']);
        offset += chunk.len();
        if line.trim().is_empty() {
            valid_len = offset;
            continue;
        }
        let parsed: RunLine = match serde_json::from_str(line) {
            Ok(parsed) => parsed,
            Err(_) if !terminated => {
                file.truncated_tail = true;
                break;
            }
            Err(e) => {
                return Err(RunLogError::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        match parsed {
            RunLine::Header(header) => {
                if header.schema_version != SCHEMA_VERSION {
                    return Err(RunLogError::SchemaVersion {
                        path: path.to_path_buf(),
                        found: header.schema_version,
                    });
                }
                if file.header.is_some() || !file.records.is_empty() {
                    return Err(RunLogError::Malformed {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "header must be the first line".into(),
                    });
                }
                file.header = Some(header);
            }
            RunLine::Record(record) => {
                let key = (record.record_id.clone(), record.strategy, record.model.clone());
                if !seen.insert(key) {
                    return Err(RunLogError::DuplicateRecord {
                        path: path.to_path_buf(),
                        id: record.record_id,
                        strategy: record.strategy,
                        model: record.model,
                    });
                }
                file.records.push(*record);
            }
        }
        valid_len = offset;
    }
    Ok((file, valid_len))
}

pub fn read_run(path: impl AsRef<Path>) -> Result<RunFile, RunLogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_run_text(path, &text)?.0)
}

/// Appends records to a run file, flushing after each one.
pub struct RunWriter {
    path: PathBuf,
    out: BufWriter<File>,
    written: usize,
}

impl RunWriter {
    /// Creates (or truncates) `path` and writes the header line.
    pub fn create(path: impl AsRef<Path>, header: &RunHeader) -> Result<Self, RunLogError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut writer = Self {
            out: BufWriter::new(file),
            path,
            written: 0,
        };
        writer.write_line(&RunLine::Header(header.clone()))?;
        Ok(writer)
    }

    /// Opens an existing run for appending, cutting off a truncated trailing
    /// line first. A missing or empty file is created with `header`.
    pub fn resume(path: impl AsRef<Path>, header: &RunHeader) -> Result<Self, RunLogError> {
        let path = path.as_ref().to_path_buf();
        let mut text = String::new();
        match File::open(&path) {
            Ok(mut f) => {
                f.read_to_string(&mut text).map_err(io_err(&path))?;
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(&path)(e)),
        }
        let (existing, valid_len) = parse_run_text(&path, &text)?;
        let Some(found) = existing.header else {
            return Self::create(&path, header);
        };
        if found.strategy != header.strategy || found.model != header.model {
            return Err(RunLogError::HeaderMismatch {
                path,
                found: format!("{} / {}", found.strategy, found.model),
                expected: format!("{} / {}", header.strategy, header.model),
            });
        }
        let file = OpenOptions::new().write(true).open(&path).map_err(io_err(&path))?;
        file.set_len(valid_len as u64).map_err(io_err(&path))?;
        let mut file = file;
        io::Seek::seek(&mut file, io::SeekFrom::End(0)).map_err(io_err(&path))?;
        Ok(Self {
            out: BufWriter::new(file),
            path,
            written: 0,
        })
    }

    fn write_line(&mut self, line: &RunLine) -> Result<(), RunLogError> {
        let json = serde_json::to_string(line).expect("run line serializes");
        let path = &self.path;
        self.out
            .write_all(json.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(io_err(path))
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<(), RunLogError> {
        self.write_line(&RunLine::Record(Box::new(record.clone())))?;
        self.written += 1;
        Ok(())
    }

    /// Records written by this writer.
    pub fn written(&self) -> usize {
        self.written
    }
}

#[derive(Debug, Error)]
#[error("persisting run failed after {written} records: {source}")]
pub struct PersistError {
    pub written: usize,
    pub source: RunLogError,
}

/// Writes every record in order, stopping at the first failure.
pub fn persist_run<I>(records: I, writer: &mut RunWriter) -> Result<usize, PersistError>
where
    I: IntoIterator<Item = RunRecord>,
{
    let mut written = 0;
    for record in records {
        writer
            .append(&record)
            .map_err(|source| PersistError { written, source })?;
        written += 1;
    }
    Ok(written)
}

/// Records that have no completed entry for `strategy` and `model` in the run
/// file at `run_path`. A missing run file means nothing is done yet.
pub fn resume_filter(
    dataset: Vec<ProblemRecord>,
    run_path: impl AsRef<Path>,
    strategy: StrategySpec,
    model: &str,
) -> Result<Vec<ProblemRecord>, RunLogError> {
    let path = run_path.as_ref();
    if !path.exists() {
        return Ok(dataset);
    }
    let done: HashSet<String> = read_run(path)?
        .records
        .into_iter()
        .filter(|r| r.strategy == strategy && r.model == model)
        .map(|r| r.record_id)
        .collect();
    Ok(dataset.into_iter().filter(|r| !done.contains(&r.id)).collect())
}

/// SHA-256 over the JSON encoding of `config`, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationLine {
    pub id: String,
    pub fn_annotation: FnAnnotation,
}

/// Reads an annotation sidecar; later lines override earlier ones.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationLine>, RunLogError> {
    let path = path.as_ref();
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RunLogError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn append_annotation(path: impl AsRef<Path>, line: &AnnotationLine) -> Result<(), RunLogError> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let json = serde_json::to_string(line).expect("annotation serializes");
    writeln!(file, "{json}").map_err(io_err(path))
}
