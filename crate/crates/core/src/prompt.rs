//! The two review prompts: single-pass (whole proof) and chunk verification.
//!
//! Template text lives in `templates/` and is substituted literally: values
//! are inserted once and never scanned for placeholders again.

use thiserror::Error;

use crate::backend::ReviewRequest;
use crate::model::ReviewScope;

pub const SINGLE_PASS_SYSTEM: &str = include_str!("../templates/single_pass_system.txt");
pub const SINGLE_PASS_USER: &str = include_str!("../templates/single_pass_user.txt");
pub const CHUNK_SYSTEM: &str = include_str!("../templates/chunk_system.txt");
pub const CHUNK_USER: &str = include_str!("../templates/chunk_user.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("single-pass prompt requires a full-proof scope")]
    ExpectedFullProof,
    #[error("chunk prompt requires a chunk scope")]
    ExpectedChunk,
    #[error("template placeholder `{{{0}}}` has no value")]
    UnboundPlaceholder(String),
}

/// A rendered system/user prompt pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

/// Replaces each `{name}` in `template` with its bound value in one pass.
fn substitute(template: &str, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + bindings.iter().map(|b| b.1.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let name = close.map(|c| &after[..c]);
        match name {
            Some(name) if !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') => {
                let value = bindings
                    .iter()
                    .find(|(key, _)| *key == name)
                    .map(|(_, value)| *value)
                    .ok_or_else(|| PromptError::UnboundPlaceholder(name.to_string()))?;
                out.push_str(value);
                rest = &after[name.len() + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn require(name: &'static str, value: &str) -> Result<(), PromptError> {
    if value.is_empty() {
        Err(PromptError::EmptyField(name))
    } else {
        Ok(())
    }
}

pub fn render_single_pass_prompt(request: &ReviewRequest) -> Result<Prompt, PromptError> {
    if !matches!(request.scope, ReviewScope::FullProof) {
        return Err(PromptError::ExpectedFullProof);
    }
    require("problem", &request.problem)?;
    require("solution", &request.full_proof)?;
    Ok(Prompt {
        system: SINGLE_PASS_SYSTEM.to_string(),
        user: substitute(
            SINGLE_PASS_USER,
            &[("problem", &request.problem), ("solution", &request.full_proof)],
        )?,
    })
}

pub fn render_chunk_prompt(request: &ReviewRequest) -> Result<Prompt, PromptError> {
    let ReviewScope::Chunk {
        segment,
        chunk_index,
    } = &request.scope
    else {
        return Err(PromptError::ExpectedChunk);
    };
    require("problem", &request.problem)?;
    require("full_proof", &request.full_proof)?;
    let idx = chunk_index.to_string();
    Ok(Prompt {
        system: CHUNK_SYSTEM.to_string(),
        user: substitute(
            CHUNK_USER,
            &[
                ("problem", &request.problem),
                ("full_proof", &request.full_proof),
                ("idx", &idx),
                ("chunk", &segment.text),
            ],
        )?,
    })
}

/// Renders whichever prompt matches the request scope.
pub fn render_prompt(request: &ReviewRequest) -> Result<Prompt, PromptError> {
    match request.scope {
        ReviewScope::FullProof => render_single_pass_prompt(request),
        ReviewScope::Chunk { .. } => render_chunk_prompt(request),
    }
}
