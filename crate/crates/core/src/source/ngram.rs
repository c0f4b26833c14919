use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_context_len, check_lexicon, hash_tokenize, ProbabilitySource, DEFAULT_MAX_CONTEXT};
use crate::dist::{normalize, Distribution, TokenId};
use crate::Error;

/// Additive smoothing applied when none is configured.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

/// Count-based n-gram model with additive smoothing and suffix backoff.
///
/// Counts are kept for every context length from 0 up to `order - 1`. A query
/// uses the longest suffix of the context (at most `order - 1` tokens) that was
/// seen in training, then smooths its counts:
/// `P(t | ctx) = (c(ctx, t) + s) / (sum_u c(ctx, u) + s * V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    vocab_size: usize,
    order: usize,
    smoothing: f64,
    eos: Option<TokenId>,
    max_context: usize,
    counts: BTreeMap<Vec<TokenId>, Vec<u64>>,
    lexicon: BTreeMap<String, TokenId>,
}

impl NGramModel {
    pub fn new(vocab_size: usize, order: usize, smoothing: f64) -> Result<Self, Error> {
        if vocab_size == 0 {
            return Err(Error::InvalidModel("vocabulary must be non-empty".into()));
        }
        if order == 0 {
            return Err(Error::InvalidModel("n-gram order must be at least 1".into()));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidModel(format!("smoothing must be finite and >= 0, got {smoothing}")));
        }
        Ok(NGramModel {
            vocab_size,
            order,
            smoothing,
            eos: None,
            max_context: DEFAULT_MAX_CONTEXT,
            counts: BTreeMap::new(),
            lexicon: BTreeMap::new(),
        })
    }

    /// Counts every k-gram (k <= order) of `stream`.
    pub fn train(&mut self, stream: &[TokenId]) -> Result<(), Error> {
        if let Some(t) = stream.iter().find(|t| t.index() >= self.vocab_size) {
            return Err(Error::InvalidModel(format!("training token {t} outside vocabulary")));
        }
        for (j, &next) in stream.iter().enumerate() {
            for k in 0..=j.min(self.order - 1) {
                let row = self.counts.entry(stream[j - k..j].to_vec()).or_insert_with(|| vec![0; self.vocab_size]);
                row[next.index()] += 1;
            }
        }
        Ok(())
    }

    /// Adds raw counts for one context.
    pub fn add_counts(&mut self, ctx: Vec<TokenId>, counts: &[u64]) -> Result<(), Error> {
        if ctx.len() >= self.order {
            return Err(Error::InvalidModel(format!(
                "count context of length {} needs order > {}",
                ctx.len(),
                ctx.len()
            )));
        }
        if counts.len() != self.vocab_size {
            return Err(Error::InvalidModel(format!(
                "count row has {} entries, vocabulary is {}",
                counts.len(),
                self.vocab_size
            )));
        }
        if let Some(t) = ctx.iter().find(|t| t.index() >= self.vocab_size) {
            return Err(Error::InvalidModel(format!("count context token {t} outside vocabulary")));
        }
        let row = self.counts.entry(ctx).or_insert_with(|| vec![0; self.vocab_size]);
        for (r, c) in row.iter_mut().zip(counts) {
            *r += c;
        }
        Ok(())
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

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn counts(&self) -> impl Iterator<Item = (&[TokenId], &[u64])> {
        self.counts.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    pub fn lexicon(&self) -> &BTreeMap<String, TokenId> {
        &self.lexicon
    }

    fn row_for(&self, ctx: &[TokenId]) -> Option<&[u64]> {
        let longest = ctx.len().min(self.order - 1);
        (0..=longest).rev().find_map(|k| {
            self.counts.get(&ctx[ctx.len() - k..]).filter(|row| row.iter().any(|&c| c > 0)).map(Vec::as_slice)
        })
    }
}

impl ProbabilitySource for NGramModel {
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
        let raw = match self.row_for(ctx) {
            Some(row) => row.iter().map(|&c| c as f64 + self.smoothing).collect(),
            None => vec![self.smoothing; self.vocab_size],
        };
        normalize(raw).map_err(|_| Error::InvalidModel("n-gram model has no counts and zero smoothing".into()))
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, Error> {
        Ok(hash_tokenize(text, self.vocab_size, &self.lexicon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(ids: &[u32]) -> Vec<TokenId> {
        ids.iter().copied().map(TokenId).collect()
    }

    #[test]
    fn unigram_count_ratio() {
        let mut m = NGramModel::new(2, 1, 0.0).unwrap();
        m.train(&t(&[0, 0, 1])).unwrap();
        for ctx in [t(&[]), t(&[1]), t(&[0, 1, 1, 0])] {
            let d = m.next_distribution(&ctx).unwrap();
            assert!((d.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
            assert!((d.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bigram_uses_context_and_backs_off() {
        let mut m = NGramModel::new(3, 2, 0.0).unwrap();
        m.train(&t(&[0, 1, 0, 1, 0, 2])).unwrap();
        // after 0: 1 twice, 2 once
        let after0 = m.next_distribution(&t(&[0])).unwrap();
        assert!((after0.probs()[1] - 2.0 / 3.0).abs() < 1e-15);
        // 2 is never followed by anything: back off to unigram counts
        let after2 = m.next_distribution(&t(&[2])).unwrap();
        let unigram = m.next_distribution(&t(&[])).unwrap();
        assert_eq!(after2, unigram);
    }

    #[test]
    fn smoothing_makes_every_token_possible() {
        let mut m = NGramModel::new(4, 2, DEFAULT_SMOOTHING).unwrap();
        m.train(&t(&[0, 0, 0])).unwrap();
        let d = m.next_distribution(&t(&[0])).unwrap();
        assert!(d.probs().iter().all(|&p| p > 0.0));
        // (2 + 0.5) / (2 + 4 * 0.5)
        assert!((d.probs()[0] - 2.5 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn untrained_without_smoothing_is_an_error() {
        let m = NGramModel::new(2, 1, 0.0).unwrap();
        assert!(matches!(m.next_distribution(&[]), Err(Error::InvalidModel(_))));
        let u = NGramModel::new(4, 3, 1.0).unwrap();
        assert_eq!(u.next_distribution(&[]).unwrap(), Distribution::uniform(4).unwrap());
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(NGramModel::new(0, 1, 0.5).is_err());
        assert!(NGramModel::new(2, 0, 0.5).is_err());
        assert!(NGramModel::new(2, 1, -1.0).is_err());
        let mut m = NGramModel::new(2, 2, 0.5).unwrap();
        assert!(m.train(&t(&[3])).is_err());
        assert!(m.add_counts(t(&[0, 0]), &[1, 1]).is_err());
        assert!(m.add_counts(t(&[0]), &[1]).is_err());
        m.add_counts(t(&[0]), &[3, 1]).unwrap();
        let d = m.next_distribution(&t(&[0])).unwrap();
        assert!((d.probs()[0] - 3.5 / 5.0).abs() < 1e-15);
    }
}
