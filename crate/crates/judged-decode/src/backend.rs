//! The backends selectable with `--model`.

use std::collections::BTreeMap;
use std::path::Path;

use judged_decode_core::{Distribution, Error, NGramModel, ProbabilitySource, TableModel, TokenId};

use crate::error::CliError;
use crate::model_file::{read_json, ModelSpec, NGramModelFile, TableModelFile};
use crate::remote::RemoteSource;

#[derive(Debug)]
pub enum Backend {
    Table(TableModel),
    NGram(NGramModel),
    Remote(RemoteSource),
}

impl Backend {
    pub fn load(spec: &ModelSpec) -> Result<Self, CliError> {
        match spec {
            ModelSpec::Table(path) => Ok(Backend::Table(read_json::<TableModelFile>(Path::new(path))?.build()?)),
            ModelSpec::NGram(path) => Ok(Backend::NGram(read_json::<NGramModelFile>(Path::new(path))?.build()?)),
            ModelSpec::Remote(url) => RemoteSource::connect(url).map(Backend::Remote).map_err(CliError::Backend),
        }
    }

    fn lexicon(&self) -> Option<&BTreeMap<String, TokenId>> {
        match self {
            Backend::Table(m) => Some(m.lexicon()),
            Backend::NGram(m) => Some(m.lexicon()),
            Backend::Remote(_) => None,
        }
    }
}

impl ProbabilitySource for Backend {
    fn vocab_size(&self) -> usize {
        match self {
            Backend::Table(m) => m.vocab_size(),
            Backend::NGram(m) => m.vocab_size(),
            Backend::Remote(m) => m.vocab_size(),
        }
    }

    fn eos_token(&self) -> Option<TokenId> {
        match self {
            Backend::Table(m) => m.eos_token(),
            Backend::NGram(m) => m.eos_token(),
            Backend::Remote(m) => m.eos_token(),
        }
    }

    fn max_context(&self) -> usize {
        match self {
            Backend::Table(m) => m.max_context(),
            Backend::NGram(m) => m.max_context(),
            Backend::Remote(m) => m.max_context(),
        }
    }

    fn next_distribution(&self, ctx: &[TokenId]) -> Result<Distribution, Error> {
        match self {
            Backend::Table(m) => m.next_distribution(ctx),
            Backend::NGram(m) => m.next_distribution(ctx),
            Backend::Remote(m) => m.next_distribution(ctx),
        }
    }

    fn next_distributions_batch(&self, ctxs: &[Vec<TokenId>]) -> Result<Vec<Distribution>, Error> {
        match self {
            Backend::Table(m) => m.next_distributions_batch(ctxs),
            Backend::NGram(m) => m.next_distributions_batch(ctxs),
            Backend::Remote(m) => m.next_distributions_batch(ctxs),
        }
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, Error> {
        match self {
            Backend::Table(m) => m.tokenize(text),
            Backend::NGram(m) => m.tokenize(text),
            Backend::Remote(m) => m.tokenize(text),
        }
    }

    /// Remote sources ask the server. Toy models spell tokens through their
    /// lexicon and give up if any token has no word.
    fn detokenize(&self, tokens: &[TokenId]) -> Result<Option<String>, Error> {
        if let Backend::Remote(m) = self {
            return m.detokenize(tokens);
        }
        let Some(lexicon) = self.lexicon().filter(|l| !l.is_empty()) else {
            return Ok(None);
        };
        let words: BTreeMap<TokenId, &str> = lexicon.iter().map(|(w, &t)| (t, w.as_str())).collect();
        let spelled: Option<Vec<&str>> = tokens.iter().map(|t| words.get(t).copied()).collect();
        Ok(spelled.map(|w| w.join(" ")))
    }
}
