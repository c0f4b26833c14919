//! Preference-judgment decoding.
//!
//! One base source plays two roles behind two preference prefixes. Each step
//! the draft role proposes `lambda` tokens, the judge role scores all of them
//! with a single batched call, and the first rejected position is resampled
//! from the residual. Under [`RoleSchedule::Alternate`] the sides swap roles
//! after every step; [`RoleSchedule::Fixed`] keeps the first draft side.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::TokenId;
use crate::kernel::{run_generation, verify_window, SamplingOptions, StepTrace};
use crate::seed::stream_rng;
use crate::source::{PreferenceAssignment, PrefixTemplate, PrefixedSource, ProbabilitySource, Side};
use crate::Error;

pub use crate::kernel::GenerationResult;

/// Alias kept for readers coming from the protocol description.
pub type JudgmentStepTrace = StepTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    /// Tokens drafted per judgment step.
    pub lambda: usize,
    pub max_new_tokens: usize,
    pub first_draft_side: Side,
    pub sampling: SamplingOptions,
    pub template: PrefixTemplate,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            lambda: 4,
            max_new_tokens: 32,
            first_draft_side: Side::A,
            sampling: SamplingOptions::default(),
            template: PrefixTemplate::default(),
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.lambda == 0 {
            return Err(Error::InvalidConfig("lambda must be at least 1".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::InvalidConfig("max_new_tokens must be at least 1".into()));
        }
        self.sampling.validate()
    }
}

/// One draft/judge window over already-prefixed role sources.
pub fn judgment_step<D, J, R>(
    draft: &D,
    judge: &J,
    ctx: &[TokenId],
    draft_side: Side,
    cfg: &JudgeConfig,
    rng: &mut R,
) -> Result<(Vec<TokenId>, StepTrace), Error>
where
    D: ProbabilitySource + ?Sized,
    J: ProbabilitySource + ?Sized,
    R: Rng + ?Sized,
{
    let trace = verify_window(draft, judge, ctx, cfg.lambda, draft_side, &cfg.sampling, rng)?;
    Ok((trace.emitted.clone(), trace))
}

/// Generates from `prompt`, alternating or fixing roles per the assignment's
/// schedule. Both roles query `source`; they differ only in prefix.
pub fn generate<S, R>(
    source: &S,
    assignment: &PreferenceAssignment,
    prompt: &[TokenId],
    cfg: &JudgeConfig,
    rng: &mut R,
) -> Result<GenerationResult, Error>
where
    S: ProbabilitySource + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let side_a = PrefixedSource::for_side(source, assignment, Side::A, &cfg.template)?;
    let side_b = PrefixedSource::for_side(source, assignment, Side::B, &cfg.template)?;
    for role in [&side_a, &side_b] {
        crate::source::check_context_len(prompt.len(), role.max_context())?;
    }
    let schedule = assignment.schedule();
    run_generation(prompt, cfg.max_new_tokens, source.eos_token(), |step, ctx| {
        let draft_side = schedule.draft_side(cfg.first_draft_side, step);
        let (draft, judge) = match draft_side {
            Side::A => (&side_a, &side_b),
            Side::B => (&side_b, &side_a),
        };
        judgment_step(draft, judge, ctx, draft_side, cfg, rng).map(|(_, trace)| trace)
    })
}

/// Millisecond clock for wall-time measurements.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Clock that never advances; wall times come out as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// [`generate`] with `wall_time_ms` filled in from `clock`.
pub fn generate_timed<S, R, C>(
    source: &S,
    assignment: &PreferenceAssignment,
    prompt: &[TokenId],
    cfg: &JudgeConfig,
    rng: &mut R,
    clock: &C,
) -> Result<GenerationResult, Error>
where
    S: ProbabilitySource + ?Sized,
    R: Rng + ?Sized,
    C: Clock + ?Sized,
{
    let start = clock.now_ms();
    let mut result = generate(source, assignment, prompt, cfg, rng)?;
    result.wall_time_ms = clock.now_ms() - start;
    Ok(result)
}

/// Aggregates for one window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: usize,
    pub prompts: usize,
    pub steps: usize,
    pub tokens: usize,
    /// Reserved over drafted positions, pooled over prompts.
    pub acceptance_rate: f64,
    /// Emitted tokens over steps, pooled over prompts.
    pub tokens_per_step: f64,
    /// Reserved drafts per step.
    pub mean_reserved: f64,
    /// Mean wall time per prompt.
    pub wall_time_ms: f64,
}

/// Runs [`generate`] over every prompt for each window length.
///
/// Each `(lambda, prompt)` run draws from its own generator seeded by
/// `seed` and the prompt id, so every row sees the same randomness per prompt.
pub fn lambda_sweep<S, C>(
    source: &S,
    assignment: &PreferenceAssignment,
    prompts: &[(String, Vec<TokenId>)],
    lambdas: &[usize],
    base: &JudgeConfig,
    seed: u64,
    clock: &C,
) -> Result<Vec<SweepRow>, Error>
where
    S: ProbabilitySource + ?Sized,
    C: Clock + ?Sized,
{
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("lambda sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = JudgeConfig { lambda, ..base.clone() };
        let (mut steps, mut tokens, mut drafted, mut reserved, mut wall) = (0, 0, 0, 0, 0.0);
        for (id, prompt) in prompts {
            let mut rng = stream_rng(seed, id);
            let result = generate_timed(source, assignment, prompt, &cfg, &mut rng, clock)?;
            steps += result.steps();
            tokens += result.output.len();
            drafted += result.drafted_total();
            reserved += result.reserved_total();
            wall += result.wall_time_ms;
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        rows.push(SweepRow {
            lambda,
            prompts: prompts.len(),
            steps,
            tokens,
            acceptance_rate: ratio(reserved, drafted),
            tokens_per_step: ratio(tokens, steps),
            mean_reserved: ratio(reserved, steps),
            wall_time_ms: if prompts.is_empty() { 0.0 } else { wall / prompts.len() as f64 },
        });
    }
    Ok(rows)
}
