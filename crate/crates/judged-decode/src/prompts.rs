//! Prompt files: one JSON object per line, `{"id": "...", "prompt": ...}`,
//! where `prompt` is either text (tokenized by the backend) or a token array.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use judged_decode_core::{ProbabilitySource, TokenId};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptBody {
    Text(String),
    Tokens(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRecord {
    pub id: String,
    pub prompt: PromptBody,
}

impl PromptRecord {
    pub fn tokens<S: ProbabilitySource + ?Sized>(&self, source: &S) -> Result<Vec<TokenId>, CliError> {
        match &self.prompt {
            PromptBody::Text(text) => Ok(source.tokenize(text)?),
            PromptBody::Tokens(ids) => {
                if let Some(t) = ids.iter().find(|&&t| t as usize >= source.vocab_size()) {
                    return Err(CliError::Config(format!(
                        "prompt `{}` uses token {t} outside the vocabulary of {}",
                        self.id,
                        source.vocab_size()
                    )));
                }
                Ok(ids.iter().copied().map(TokenId).collect())
            }
        }
    }
}

/// Parses a prompt file. Blank lines are skipped; ids must be unique.
pub fn parse_prompts(text: &str) -> Result<Vec<PromptRecord>, CliError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PromptRecord =
            serde_json::from_str(line).map_err(|e| CliError::Config(format!("prompt line {}: {e}", n + 1)))?;
        if !seen.insert(record.id.clone()) {
            return Err(CliError::Config(format!("prompt line {}: duplicate id `{}`", n + 1, record.id)));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_prompts(path: &Path) -> Result<Vec<PromptRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_prompts(&text)
}
