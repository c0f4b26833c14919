//! The draft/verify/resample kernel shared by speculative decoding and the
//! preference-judgment step.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{self, apply_temperature, sample, top_k_truncate, DistError, Distribution, TokenId};
use crate::source::{ProbabilitySource, Side};
use crate::Error;

/// Which distributions top-k truncation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopKScope {
    Draft,
    Judge,
    #[default]
    Both,
}

/// How the draft side picks its proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DraftMode {
    /// `t_i ~ q_i`. The only mode the exactness guarantee covers.
    #[default]
    Multinomial,
    /// `t_i = argmax q_i`, verified stochastically as usual.
    GreedyDraft,
}

/// Distribution used to resample after a rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualRule {
    /// `norm(max(0, p - q))`.
    #[default]
    Adjusted,
    /// Plain `p`, ignoring the draft. Biased; exists so the Monte Carlo
    /// checks can show they detect a broken residual.
    Unadjusted,
}

/// Transformations applied to backend distributions before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub top_k_scope: TopKScope,
    pub draft_mode: DraftMode,
    pub residual_rule: ResidualRule,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            temperature: 1.0,
            top_k: None,
            top_k_scope: TopKScope::Both,
            draft_mode: DraftMode::Multinomial,
            residual_rule: ResidualRule::Adjusted,
        }
    }
}

#[derive(Clone, Copy)]
enum Role {
    Draft,
    Judge,
}

impl SamplingOptions {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        if self.top_k == Some(0) {
            return Err(Error::InvalidConfig("top-k must be at least 1".into()));
        }
        Ok(())
    }

    /// Temperature first, then top-k when the scope covers `role`.
    fn shape(&self, d: Distribution, role: Role) -> Distribution {
        let d = if self.temperature == 1.0 { d } else { apply_temperature(&d, self.temperature) };
        let in_scope = matches!(
            (self.top_k_scope, role),
            (TopKScope::Both, _) | (TopKScope::Draft, Role::Draft) | (TopKScope::Judge, Role::Judge)
        );
        match self.top_k {
            Some(k) if in_scope => top_k_truncate(&d, k),
            _ => d,
        }
    }

    pub(crate) fn shape_judge(&self, d: Distribution) -> Distribution {
        self.shape(d, Role::Judge)
    }
}

/// Number of leading proposals that survive: the zero-based index of the first
/// position whose draw exceeds its acceptance ratio, or the window length if
/// none does. A draw equal to the ratio accepts.
///
/// # Panics
///
/// If `ratios` and `draws` differ in length.
pub fn accept_count(ratios: &[f64], draws: &[f64]) -> usize {
    assert_eq!(ratios.len(), draws.len(), "one draw per drafted position");
    ratios.iter().zip(draws).position(|(r, e)| e > r).unwrap_or(ratios.len())
}

/// Record of one draft/verify window.
///
/// All uniforms consumed by the step are logged, so the drafted and emitted
/// tokens can be replayed with [`crate::dist::sample`] against the same
/// distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub draft_side: Side,
    pub window: usize,
    pub drafted: Vec<TokenId>,
    /// `q_i(t_i)` after shaping.
    pub draft_probs: Vec<f64>,
    /// `p_i(t_i)` after shaping.
    pub judge_probs: Vec<f64>,
    /// Uniforms that sampled each drafted token; empty in greedy-draft mode.
    pub draft_draws: Vec<f64>,
    /// Acceptance uniforms, one per drafted position.
    pub accept_draws: Vec<f64>,
    /// Drafted tokens kept before the first rejection.
    pub reserved: usize,
    /// True iff a rejection happened (`reserved < window`).
    pub residual_used: bool,
    /// The residual had no float mass, so the judge distribution was used.
    pub residual_degenerate: bool,
    pub final_token: TokenId,
    pub final_draw: f64,
    /// Tokens this step added to the output, after eos and budget truncation.
    pub emitted: Vec<TokenId>,
}

impl StepTrace {
    /// Whether the emitted tokens end generation.
    pub fn hit_eos(&self, eos: Option<TokenId>) -> bool {
        matches!((eos, self.emitted.last()), (Some(e), Some(&last)) if e == last)
    }
}

/// Drafts `window` tokens from `draft`, verifies them against `judge`, and
/// resamples at the first rejection.
///
/// Draws are consumed in a fixed order: one per drafted token (multinomial
/// mode only), then one acceptance draw per position, then one for the final
/// token.
pub fn verify_window<D, J, R>(
    draft: &D,
    judge: &J,
    ctx: &[TokenId],
    window: usize,
    draft_side: Side,
    opts: &SamplingOptions,
    rng: &mut R,
) -> Result<StepTrace, Error>
where
    D: ProbabilitySource + ?Sized,
    J: ProbabilitySource + ?Sized,
    R: Rng + ?Sized,
{
    if window == 0 {
        return Err(Error::InvalidConfig("draft window must be at least 1".into()));
    }
    if draft.vocab_size() != judge.vocab_size() {
        return Err(Error::Dist(DistError::LengthMismatch { left: draft.vocab_size(), right: judge.vocab_size() }));
    }

    let mut running = ctx.to_vec();
    let mut judge_ctxs = Vec::with_capacity(window + 1);
    let mut qs = Vec::with_capacity(window);
    let mut drafted = Vec::with_capacity(window);
    let mut draft_draws = Vec::new();
    for _ in 0..window {
        let q = opts.shape(draft.next_distribution(&running)?, Role::Draft);
        let t = match opts.draft_mode {
            DraftMode::Multinomial => {
                let u: f64 = rng.gen();
                draft_draws.push(u);
                sample(&q, u)
            }
            DraftMode::GreedyDraft => q.argmax(),
        };
        judge_ctxs.push(running.clone());
        running.push(t);
        drafted.push(t);
        qs.push(q);
    }
    judge_ctxs.push(running);

    let ps: Vec<Distribution> =
        judge.next_distributions_batch(&judge_ctxs)?.into_iter().map(|p| opts.shape(p, Role::Judge)).collect();
    if ps.len() != window + 1 {
        return Err(Error::Protocol(alloc::format!(
            "judge returned {} distributions for {} contexts",
            ps.len(),
            window + 1
        )));
    }

    let draft_probs: Vec<f64> = qs.iter().zip(&drafted).map(|(q, &t)| q.prob(t)).collect();
    let judge_probs: Vec<f64> = ps.iter().zip(&drafted).map(|(p, &t)| p.prob(t)).collect();
    let ratios: Vec<f64> =
        draft_probs.iter().zip(&judge_probs).map(|(&q, &p)| if q > 0.0 { p / q } else { f64::INFINITY }).collect();
    let accept_draws: Vec<f64> = (0..window).map(|_| rng.gen::<f64>()).collect();
    let reserved = accept_count(&ratios, &accept_draws);

    let residual_used = reserved < window;
    let mut residual_degenerate = false;
    let final_dist = if !residual_used {
        ps[window].clone()
    } else {
        match opts.residual_rule {
            ResidualRule::Unadjusted => ps[reserved].clone(),
            ResidualRule::Adjusted => match dist::residual(&ps[reserved], &qs[reserved]) {
                Ok(r) => r.distribution,
                Err(DistError::AllZeroMass) => {
                    residual_degenerate = true;
                    ps[reserved].clone()
                }
                Err(e) => return Err(e.into()),
            },
        }
    };
    let final_draw: f64 = rng.gen();
    let final_token = sample(&final_dist, final_draw);

    let eos = judge.eos_token();
    let mut emitted = Vec::with_capacity(reserved + 1);
    let mut stopped = false;
    for &t in &drafted[..reserved] {
        emitted.push(t);
        if Some(t) == eos {
            stopped = true;
            break;
        }
    }
    if !stopped {
        emitted.push(final_token);
    }

    Ok(StepTrace {
        draft_side,
        window,
        drafted,
        draft_probs,
        judge_probs,
        draft_draws,
        accept_draws,
        reserved,
        residual_used,
        residual_degenerate,
        final_token,
        final_draw,
        emitted,
    })
}

/// Output of a generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub output: Vec<TokenId>,
    pub traces: Vec<StepTrace>,
    /// Reserved drafts over drafted positions, across all steps.
    pub acceptance_rate: f64,
    /// Emitted tokens per step.
    pub tokens_per_step: f64,
    pub wall_time_ms: f64,
}

impl GenerationResult {
    pub(crate) fn from_parts(output: Vec<TokenId>, traces: Vec<StepTrace>) -> Self {
        let drafted: usize = traces.iter().map(|t| t.window).sum();
        let reserved: usize = traces.iter().map(|t| t.reserved).sum();
        let acceptance_rate = if drafted == 0 { 0.0 } else { reserved as f64 / drafted as f64 };
        let tokens_per_step = if traces.is_empty() { 0.0 } else { output.len() as f64 / traces.len() as f64 };
        GenerationResult { output, traces, acceptance_rate, tokens_per_step, wall_time_ms: 0.0 }
    }

    pub fn steps(&self) -> usize {
        self.traces.len()
    }

    pub fn reserved_total(&self) -> usize {
        self.traces.iter().map(|t| t.reserved).sum()
    }

    pub fn drafted_total(&self) -> usize {
        self.traces.iter().map(|t| t.window).sum()
    }
}

/// Runs `step` until `max_new_tokens` tokens exist or eos is emitted. The
/// last step's emissions are cut to the remaining budget.
pub(crate) fn run_generation<F>(
    prompt: &[TokenId],
    max_new_tokens: usize,
    eos: Option<TokenId>,
    mut step: F,
) -> Result<GenerationResult, Error>
where
    F: FnMut(usize, &[TokenId]) -> Result<StepTrace, Error>,
{
    if max_new_tokens == 0 {
        return Err(Error::InvalidConfig("max_new_tokens must be at least 1".into()));
    }
    let mut ctx = prompt.to_vec();
    let mut output = Vec::with_capacity(max_new_tokens);
    let mut traces = Vec::new();
    while output.len() < max_new_tokens {
        let mut trace = step(traces.len(), &ctx)?;
        trace.emitted.truncate(max_new_tokens - output.len());
        output.extend_from_slice(&trace.emitted);
        ctx.extend_from_slice(&trace.emitted);
        let done = trace.hit_eos(eos);
        traces.push(trace);
        if done {
            break;
        }
    }
    Ok(GenerationResult::from_parts(output, traces))
}
