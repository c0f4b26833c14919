use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{check_context_len, check_lexicon, hash_tokenize, ProbabilitySource, DEFAULT_MAX_CONTEXT};
use crate::dist::{Distribution, TokenId};
use crate::Error;

/// Explicit lookup table from the last `depth` context tokens to a
/// distribution.
///
/// A context shorter than `depth` is looked up whole, so `depth = 2` tables
/// usually list `[]`, every `[a]` and every `[a, b]`. Unlisted keys fall back to
/// the default distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    vocab_size: usize,
    depth: usize,
    eos: Option<TokenId>,
    max_context: usize,
    default: Distribution,
    entries: BTreeMap<Vec<TokenId>, Distribution>,
    lexicon: BTreeMap<String, TokenId>,
}

impl TableModel {
    pub fn new(depth: usize, default: Distribution) -> Self {
        TableModel {
            vocab_size: default.vocab_size(),
            depth,
            eos: None,
            max_context: DEFAULT_MAX_CONTEXT,
            default,
            entries: BTreeMap::new(),
            lexicon: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, ctx: Vec<TokenId>, dist: Distribution) -> Result<(), Error> {
        if ctx.len() > self.depth {
            return Err(Error::InvalidModel(format!("table key of length {} exceeds depth {}", ctx.len(), self.depth)));
        }
        if let Some(t) = ctx.iter().find(|t| t.index() >= self.vocab_size) {
            return Err(Error::InvalidModel(format!("table key token {t} outside vocabulary")));
        }
        if dist.vocab_size() != self.vocab_size {
            return Err(Error::InvalidModel(format!(
                "table entry has {} probabilities, vocabulary is {}",
                dist.vocab_size(),
                self.vocab_size
            )));
        }
        self.entries.insert(ctx, dist);
        Ok(())
    }

    pub fn with_entry(mut self, ctx: Vec<TokenId>, dist: Distribution) -> Result<Self, Error> {
        self.insert(ctx, dist)?;
        Ok(self)
    }

    pub fn with_eos(mut self, eos: Option<TokenId>) -> Result<Self, Error> {
        if let Some(t) = eos.filter(|t| t.index() >= self.vocab_size) {
            return Err(Error::InvalidModel(format!("eos token {t} outside vocabulary")));
        }
        self.eos = eos;
        Ok(self)
    }

    pub fn with_max_context(mut self, max_context: usize) -> Self {
        self.max_context = max_context;
        self
    }

    pub fn with_lexicon(mut self, lexicon: BTreeMap<String, TokenId>) -> Result<Self, Error> {
        check_lexicon(&lexicon, self.vocab_size)?;
        self.lexicon = lexicon;
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn default_distribution(&self) -> &Distribution {
        &self.default
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[TokenId], &Distribution)> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn lexicon(&self) -> &BTreeMap<String, TokenId> {
        &self.lexicon
    }

    /// Distribution for `ctx` without the length check.
    pub fn lookup(&self, ctx: &[TokenId]) -> &Distribution {
        let key = &ctx[ctx.len().saturating_sub(self.depth)..];
        self.entries.get(key).unwrap_or(&self.default)
    }
}

impl ProbabilitySource for TableModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn eos_token(&self) -> Option<TokenId> {
        self.eos
    }

    fn max_context(&self) -> usize {
        self.max_context
    }

    fn next_distribution(&self, ctx: &[TokenId]) -> Result<Distribution, Error> {
        check_context_len(ctx.len(), self.max_context)?;
        Ok(self.lookup(ctx).clone())
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, Error> {
        Ok(hash_tokenize(text, self.vocab_size, &self.lexicon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    fn t(ids: &[u32]) -> Vec<TokenId> {
        ids.iter().copied().map(TokenId).collect()
    }

    #[test]
    fn direct_lookup() {
        let m = TableModel::new(0, d(&[0.5, 0.5]));
        assert_eq!(m.next_distribution(&[]).unwrap(), d(&[0.5, 0.5]));
    }

    #[test]
    fn suffix_lookup_and_default() {
        let m = TableModel::new(1, d(&[0.5, 0.5]))
            .with_entry(t(&[1]), d(&[1.0, 0.0]))
            .unwrap()
            .with_entry(vec![], d(&[0.25, 0.75]))
            .unwrap();
        assert_eq!(m.next_distribution(&[]).unwrap(), d(&[0.25, 0.75]));
        assert_eq!(m.next_distribution(&t(&[0, 0, 1])).unwrap(), d(&[1.0, 0.0]));
        assert_eq!(m.next_distribution(&t(&[1, 0])).unwrap(), d(&[0.5, 0.5]));
    }

    #[test]
    fn context_too_long() {
        let m = TableModel::new(0, d(&[0.5, 0.5])).with_max_context(2);
        assert_eq!(m.next_distribution(&t(&[0, 0, 0])), Err(Error::ContextTooLong { len: 3, max: 2 }));
    }

    #[test]
    fn batch_matches_single_calls() {
        let m = TableModel::new(1, d(&[0.5, 0.5])).with_entry(t(&[1]), d(&[0.0, 1.0])).unwrap();
        let ctxs = vec![t(&[]), t(&[1]), t(&[1])];
        let batch = m.next_distributions_batch(&ctxs).unwrap();
        for (c, got) in ctxs.iter().zip(&batch) {
            assert_eq!(&m.next_distribution(c).unwrap(), got);
        }
        assert_eq!(batch[1], batch[2]);
    }

    #[test]
    fn rejects_bad_entries() {
        let m = TableModel::new(1, d(&[0.5, 0.5]));
        assert!(m.clone().with_entry(t(&[0, 1]), d(&[1.0, 0.0])).is_err());
        assert!(m.clone().with_entry(t(&[4]), d(&[1.0, 0.0])).is_err());
        assert!(m.clone().with_entry(t(&[0]), d(&[1.0])).is_err());
        assert!(m.with_eos(Some(TokenId(2))).is_err());
    }
}
