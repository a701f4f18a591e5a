//! Benchmark ingestion from JSONL.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{LabelAdapter, LabelError, ProblemRecord};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("line {line}: malformed JSON: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: field `{field}` has the wrong type")]
    WrongType { line: usize, field: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {source}")]
    Label { line: usize, source: LabelError },
    #[error("line {line}: empty proof")]
    EmptyProof { line: usize },
}

/// Source field names for each logical record field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMap {
    pub id: String,
    pub problem: String,
    pub proof: String,
    pub label_or_score: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            problem: "problem".into(),
            proof: "proof".into(),
            label_or_score: "label".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subset {
    pub size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub adapter: LabelAdapter,
    pub path: PathBuf,
    #[serde(default)]
    pub field_map: FieldMap,
    /// Seeded uniform subsample applied after loading.
    #[serde(default)]
    pub subset: Option<Subset>,
}

impl DatasetManifest {
    /// A manifest for a bare JSONL file with default field names.
    pub fn for_jsonl(path: impl Into<PathBuf>, adapter: LabelAdapter) -> Self {
        let path = path.into();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Self {
            name,
            adapter,
            path,
            field_map: FieldMap::default(),
            subset: None,
        }
    }

    /// Reads a TOML manifest; a relative `path` is resolved against the
    /// manifest's directory.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: DatasetManifest =
            toml::from_str(&text).map_err(|e| DatasetError::Manifest {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        if manifest.path.is_relative() {
            if let Some(dir) = path.parent() {
                manifest.path = dir.join(&manifest.path);
            }
        }
        Ok(manifest)
    }
}

fn field<'a>(row: &'a Value, line: usize, name: &str) -> Result<&'a Value, DatasetError> {
    row.get(name).ok_or_else(|| DatasetError::MissingField {
        line,
        field: name.to_string(),
    })
}

fn text_field(row: &Value, line: usize, name: &str) -> Result<String, DatasetError> {
    match field(row, line, name)? {
        Value::String(s) => Ok(s.clone()),
        _ => Err(DatasetError::WrongType {
            line,
            field: name.to_string(),
        }),
    }
}

/// Parses dataset JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_dataset(text: &str, manifest: &DatasetManifest) -> Result<Vec<ProblemRecord>, DatasetError> {
    let map = &manifest.field_map;
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: Value = serde_json::from_str(raw).map_err(|e| DatasetError::MalformedLine {
            line,
            message: e.to_string(),
        })?;
        if !row.is_object() {
            return Err(DatasetError::MalformedLine {
                line,
                message: "expected a JSON object".into(),
            });
        }
        let id = match field(&row, line, &map.id)? {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => {
                return Err(DatasetError::WrongType {
                    line,
                    field: map.id.clone(),
                })
            }
        };
        if id.is_empty() {
            return Err(DatasetError::WrongType {
                line,
                field: map.id.clone(),
            });
        }
        let problem = text_field(&row, line, &map.problem)?;
        let proof = text_field(&row, line, &map.proof)?;
        if proof.is_empty() {
            return Err(DatasetError::EmptyProof { line });
        }
        let wrong_label = || DatasetError::WrongType {
            line,
            field: map.label_or_score.clone(),
        };
        let (gt_label, raw_score) = match field(&row, line, &map.label_or_score)? {
            Value::Bool(b) if manifest.adapter == LabelAdapter::Binary => (*b, None),
            Value::Number(n) => {
                let score = n.as_i64().ok_or_else(wrong_label)?;
                let label = manifest
                    .adapter
                    .label(score)
                    .map_err(|source| DatasetError::Label { line, source })?;
                (label, Some(score))
            }
            _ => return Err(wrong_label()),
        };
        if !seen.insert(id.clone()) {
            return Err(DatasetError::DuplicateId { line, id });
        }
        records.push(ProblemRecord {
            id,
            problem,
            proof,
            gt_label,
            source: manifest.name.clone(),
            raw_score,
        });
    }
    Ok(records)
}

/// Loads, labels and (if the manifest asks for it) subsamples a dataset.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Vec<ProblemRecord>, DatasetError> {
    let text = std::fs::read_to_string(&manifest.path).map_err(|source| DatasetError::Io {
        path: manifest.path.clone(),
        source,
    })?;
    let records = parse_dataset(&text, manifest)?;
    Ok(match manifest.subset {
        Some(subset) => sample_subset(records, subset.size, subset.seed),
        None => records,
    })
}

/// Seeded uniform sample of `size` records, kept in input order.
pub fn sample_subset<T>(records: Vec<T>, size: usize, seed: u64) -> Vec<T> {
    if size >= records.len() {
        return records;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; records.len()];
    for i in index::sample(&mut rng, records.len(), size) {
        keep[i] = true;
    }
    records
        .into_iter()
        .zip(keep)
        .filter_map(|(record, keep)| keep.then_some(record))
        .collect()
}
