//! Next-token probability sources and preference-prefixed contexts.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dist::{Distribution, TokenId};
use crate::Error;

mod ngram;
mod preference;
mod table;

pub use ngram::{NGramModel, DEFAULT_SMOOTHING};
pub use preference::{
    build_prefixed_context, PreferenceAssignment, PreferenceDescription, PrefixTemplate, PrefixedSource, RoleSchedule,
    Side,
};
pub use table::TableModel;

/// Maximum context length toy backends accept unless configured otherwise.
pub const DEFAULT_MAX_CONTEXT: usize = 4096;

/// Anything that maps a token context to a next-token distribution.
///
/// Implementations must be referentially transparent: identical contexts
/// yield identical distributions for the lifetime of the source.
pub trait ProbabilitySource {
    fn vocab_size(&self) -> usize;

    fn eos_token(&self) -> Option<TokenId>;

    fn max_context(&self) -> usize;

    fn next_distribution(&self, ctx: &[TokenId]) -> Result<Distribution, Error>;

    /// Element `i` equals `next_distribution(&ctxs[i])`. Remote sources
    /// override this to answer the whole batch in one round trip.
    fn next_distributions_batch(&self, ctxs: &[Vec<TokenId>]) -> Result<Vec<Distribution>, Error> {
        ctxs.iter().map(|c| self.next_distribution(c)).collect()
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, Error>;

    /// Text for `tokens`, when the source has a detokenizer.
    fn detokenize(&self, _tokens: &[TokenId]) -> Result<Option<String>, Error> {
        Ok(None)
    }
}

macro_rules! forward_source {
    ($($ptr:ty),*) => {$(
        impl<S: ProbabilitySource + ?Sized> ProbabilitySource for $ptr {
            fn vocab_size(&self) -> usize {
                (**self).vocab_size()
            }
            fn eos_token(&self) -> Option<TokenId> {
                (**self).eos_token()
            }
            fn max_context(&self) -> usize {
                (**self).max_context()
            }
            fn next_distribution(&self, ctx: &[TokenId]) -> Result<Distribution, Error> {
                (**self).next_distribution(ctx)
            }
            fn next_distributions_batch(&self, ctxs: &[Vec<TokenId>]) -> Result<Vec<Distribution>, Error> {
                (**self).next_distributions_batch(ctxs)
            }
            fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, Error> {
                (**self).tokenize(text)
            }
            fn detokenize(&self, tokens: &[TokenId]) -> Result<Option<String>, Error> {
                (**self).detokenize(tokens)
            }
        }
    )*};
}

forward_source!(&S, Box<S>, Arc<S>);

/// Fails with [`Error::ContextTooLong`] when `len` exceeds `max`.
pub fn check_context_len(len: usize, max: usize) -> Result<(), Error> {
    if len > max {
        return Err(Error::ContextTooLong { len, max });
    }
    Ok(())
}

/// Whitespace word tokenizer for the toy backends.
///
/// Words listed in `lexicon` map to their declared id; any other word maps to
/// its FNV-1a hash modulo the vocabulary size. This is only meant to turn
/// preference text into stable token ids for models that have no tokenizer.
pub fn hash_tokenize(text: &str, vocab_size: usize, lexicon: &BTreeMap<String, TokenId>) -> Vec<TokenId> {
    text.split_whitespace()
        .map(|word| match lexicon.get(word) {
            Some(&id) => id,
            None => TokenId((fnv1a(word.as_bytes()) % vocab_size as u64) as u32),
        })
        .collect()
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub(crate) fn check_lexicon(lexicon: &BTreeMap<String, TokenId>, vocab_size: usize) -> Result<(), Error> {
    for (word, id) in lexicon {
        if id.index() >= vocab_size {
            return Err(Error::InvalidModel(alloc::format!(
                "lexicon entry {word:?} maps to {id}, outside vocabulary of {vocab_size}"
            )));
        }
    }
    Ok(())
}
