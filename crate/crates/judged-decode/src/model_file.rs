//! JSON documents for the toy backends and the `--model` spec syntax.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use judged_decode_core::source::DEFAULT_MAX_CONTEXT;
use judged_decode_core::{Distribution, NGramModel, TableModel, TokenId};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A table model: `default` is used for every context without an entry.
///
/// ```json
/// {"depth": 1, "default": [0.5, 0.5],
///  "entries": [{"context": [0], "probs": [0.9, 0.1]}],
///  "eos": null, "max_context": 4096, "lexicon": {"yes": 0}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableModelFile {
    pub depth: usize,
    pub default: Vec<f64>,
    #[serde(default)]
    pub entries: Vec<TableEntry>,
    #[serde(default)]
    pub eos: Option<u32>,
    #[serde(default = "default_max_context")]
    pub max_context: usize,
    #[serde(default)]
    pub lexicon: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub context: Vec<u32>,
    pub probs: Vec<f64>,
}

/// An n-gram model trained from `corpus` token streams and/or explicit
/// `counts` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGramModelFile {
    pub vocab_size: usize,
    pub order: usize,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    #[serde(default)]
    pub corpus: Vec<Vec<u32>>,
    #[serde(default)]
    pub counts: Vec<CountRow>,
    #[serde(default)]
    pub eos: Option<u32>,
    #[serde(default = "default_max_context")]
    pub max_context: usize,
    #[serde(default)]
    pub lexicon: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRow {
    pub context: Vec<u32>,
    pub counts: Vec<u64>,
}

fn default_max_context() -> usize {
    DEFAULT_MAX_CONTEXT
}

fn default_smoothing() -> f64 {
    judged_decode_core::source::DEFAULT_SMOOTHING
}

fn tokens(ids: &[u32]) -> Vec<TokenId> {
    ids.iter().copied().map(TokenId).collect()
}

fn lexicon(map: &BTreeMap<String, u32>) -> BTreeMap<String, TokenId> {
    map.iter().map(|(w, &t)| (w.clone(), TokenId(t))).collect()
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid model file: {e}"))
}

impl TableModelFile {
    pub fn build(&self) -> Result<TableModel, CliError> {
        let default = Distribution::new(self.default.clone()).map_err(invalid)?;
        let mut model = TableModel::new(self.depth, default);
        for entry in &self.entries {
            let dist = Distribution::new(entry.probs.clone()).map_err(invalid)?;
            model.insert(tokens(&entry.context), dist).map_err(invalid)?;
        }
        model
            .with_eos(self.eos.map(TokenId))
            .and_then(|m| m.with_lexicon(lexicon(&self.lexicon)))
            .map(|m| m.with_max_context(self.max_context))
            .map_err(invalid)
    }

    pub fn from_model(model: &TableModel) -> Self {
        use judged_decode_core::ProbabilitySource;
        TableModelFile {
            depth: model.depth(),
            default: model.default_distribution().probs().to_vec(),
            entries: model
                .entries()
                .map(|(ctx, d)| TableEntry { context: ctx.iter().map(|t| t.0).collect(), probs: d.probs().to_vec() })
                .collect(),
            eos: model.eos_token().map(|t| t.0),
            max_context: model.max_context(),
            lexicon: model.lexicon().iter().map(|(w, t)| (w.clone(), t.0)).collect(),
        }
    }
}

impl NGramModelFile {
    pub fn build(&self) -> Result<NGramModel, CliError> {
        let mut model = NGramModel::new(self.vocab_size, self.order, self.smoothing).map_err(invalid)?;
        for stream in &self.corpus {
            model.train(&tokens(stream)).map_err(invalid)?;
        }
        for row in &self.counts {
            model.add_counts(tokens(&row.context), &row.counts).map_err(invalid)?;
        }
        model
            .with_eos(self.eos.map(TokenId))
            .and_then(|m| m.with_lexicon(lexicon(&self.lexicon)))
            .map(|m| m.with_max_context(self.max_context))
            .map_err(invalid)
    }
}

/// Where a backend comes from, as written after `--model`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Table(String),
    NGram(String),
    Remote(String),
}

impl std::str::FromStr for ModelSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("model spec `{s}` must look like kind:location")))?;
        if rest.is_empty() {
            return Err(CliError::Config(format!("model spec `{s}` has an empty location")));
        }
        match kind {
            "table" => Ok(ModelSpec::Table(rest.to_string())),
            "ngram" => Ok(ModelSpec::NGram(rest.to_string())),
            "remote" => Ok(ModelSpec::Remote(rest.to_string())),
            other => Err(CliError::Config(format!("unknown model kind `{other}` (expected table, ngram or remote)"))),
        }
    }
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
