//! Standard speculative decoding: a draft source proposes `window` tokens and
//! a target source verifies them, so the output follows the target exactly.
//! Also hosts plain autoregressive sampling as the no-speculation baseline.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{sample, TokenId};
use crate::kernel::{run_generation, verify_window, GenerationResult, SamplingOptions, StepTrace};
use crate::source::{check_context_len, ProbabilitySource, Side};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDecodeConfig {
    pub window: usize,
    pub max_new_tokens: usize,
    pub sampling: SamplingOptions,
}

impl Default for SpecDecodeConfig {
    fn default() -> Self {
        SpecDecodeConfig { window: 4, max_new_tokens: 32, sampling: SamplingOptions::default() }
    }
}

impl SpecDecodeConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("speculative window must be at least 1".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::InvalidConfig("max_new_tokens must be at least 1".into()));
        }
        self.sampling.validate()
    }
}

/// One speculative window. The trace's `draft_side` is always [`Side::A`].
pub fn spec_decode_step<D, T, R>(
    draft: &D,
    target: &T,
    ctx: &[TokenId],
    cfg: &SpecDecodeConfig,
    rng: &mut R,
) -> Result<(Vec<TokenId>, StepTrace), Error>
where
    D: ProbabilitySource + ?Sized,
    T: ProbabilitySource + ?Sized,
    R: Rng + ?Sized,
{
    let trace = verify_window(draft, target, ctx, cfg.window, Side::A, &cfg.sampling, rng)?;
    Ok((trace.emitted.clone(), trace))
}

pub fn spec_decode_generate<D, T, R>(
    draft: &D,
    target: &T,
    prompt: &[TokenId],
    cfg: &SpecDecodeConfig,
    rng: &mut R,
) -> Result<GenerationResult, Error>
where
    D: ProbabilitySource + ?Sized,
    T: ProbabilitySource + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    check_context_len(prompt.len(), draft.max_context().min(target.max_context()))?;
    run_generation(prompt, cfg.max_new_tokens, target.eos_token(), |_, ctx| {
        spec_decode_step(draft, target, ctx, cfg, rng).map(|(_, trace)| trace)
    })
}

/// Token-by-token sampling from `source`. The result has no step traces and
/// reports one token per step.
pub fn autoregressive_generate<S, R>(
    source: &S,
    prompt: &[TokenId],
    max_new_tokens: usize,
    sampling: &SamplingOptions,
    rng: &mut R,
) -> Result<GenerationResult, Error>
where
    S: ProbabilitySource + ?Sized,
    R: Rng + ?Sized,
{
    sampling.validate()?;
    let eos = source.eos_token();
    let mut ctx = prompt.to_vec();
    let mut output = Vec::with_capacity(max_new_tokens);
    while output.len() < max_new_tokens {
        let d = sampling.shape_judge(source.next_distribution(&ctx)?);
        let t = sample(&d, rng.gen());
        output.push(t);
        ctx.push(t);
        if Some(t) == eos {
            break;
        }
    }
    Ok(GenerationResult { output, traces: Vec::new(), acceptance_rate: 0.0, tokens_per_step: 1.0, wall_time_ms: 0.0 })
}
