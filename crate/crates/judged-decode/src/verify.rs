//! The oracle suite behind `judged-decode verify`.
//!
//! Three parts: exact enumeration of random judgment steps, the same for
//! speculative decoding, and a Monte Carlo run of the real engine against the
//! enumerated first-token marginal.

use judged_decode_core::kernel::verify_window;
use judged_decode_core::oracle::{
    enumerate_first_token, enumerate_step, monte_carlo_marginal, random_cases, random_table_model, verify_spec_decode,
    EnumerationReport, MonteCarloReport,
};
use judged_decode_core::seed::stream_rng;
use judged_decode_core::{Error, SamplingOptions, Side, TableModel, TokenId};
use num_rational::BigRational;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Largest vocabulary in the exact families.
    pub vocab: usize,
    /// Largest window in the exact families.
    pub lambda: usize,
    pub cases: usize,
    /// Largest speculative window checked exactly.
    pub spec_window: usize,
    pub mc_vocab: usize,
    pub mc_lambda: usize,
    pub trials: u64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            vocab: 4,
            lambda: 3,
            cases: 200,
            spec_window: 2,
            mc_vocab: 8,
            mc_lambda: 4,
            trials: 1_000_000,
            tol: 0.005,
            seed: 0,
        }
    }
}

/// Summary of one enumerated case. Rationals are written as `"n/d"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: usize,
    pub vocab: usize,
    pub window: usize,
    pub exact_equal: bool,
    pub partition_holds: bool,
    pub max_abs_deviation: f64,
    pub acceptance_probability: String,
    pub first_marginal: Vec<String>,
    pub first_reference: Vec<String>,
}

impl CaseReport {
    fn new(case: usize, vocab: usize, window: usize, r: &EnumerationReport) -> Self {
        let fmt = |v: &[BigRational]| v.iter().map(ToString::to_string).collect();
        CaseReport {
            case,
            vocab,
            window,
            exact_equal: r.exact_equal,
            partition_holds: r.partition_holds,
            max_abs_deviation: r.max_abs_deviation,
            acceptance_probability: r.acceptance_probability.to_string(),
            first_marginal: fmt(&r.marginals[0]),
            first_reference: fmt(&r.reference_marginals[0]),
        }
    }

    pub fn passed(&self) -> bool {
        self.exact_equal && self.partition_holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub cases: usize,
    pub passed: usize,
    pub exact_failures: usize,
    pub partition_failures: usize,
    pub max_abs_deviation: f64,
    pub reports: Vec<CaseReport>,
}

impl FamilyReport {
    fn from_cases(reports: Vec<CaseReport>) -> Self {
        FamilyReport {
            cases: reports.len(),
            passed: reports.iter().filter(|r| r.passed()).count(),
            exact_failures: reports.iter().filter(|r| !r.exact_equal).count(),
            partition_failures: reports.iter().filter(|r| !r.partition_holds).count(),
            max_abs_deviation: reports.iter().map(|r| r.max_abs_deviation).fold(0.0, f64::max),
            reports,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.cases
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub vocab: usize,
    pub lambda: usize,
    pub trials: u64,
    pub tv_distance: f64,
    pub tol: f64,
    pub reference_is_judge: bool,
    pub empirical: Vec<f64>,
    pub reference: Vec<f64>,
}

impl MonteCarloSummary {
    pub fn passed(&self) -> bool {
        self.reference_is_judge && self.tv_distance <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub judgment: FamilyReport,
    pub speculative: FamilyReport,
    pub monte_carlo: MonteCarloSummary,
    pub passed: bool,
}

/// Enumerates `opts.cases` random judgment steps exactly.
pub fn exact_family(opts: &VerifyOptions) -> Result<FamilyReport, Error> {
    let mut rng = stream_rng(opts.seed, "exact-judgment");
    let mut reports = Vec::with_capacity(opts.cases);
    for (i, case) in random_cases(&mut rng, opts.cases, opts.vocab, opts.lambda).into_iter().enumerate() {
        let r = enumerate_step(&case.draft, &case.judge, &case.prompt, case.window)?;
        reports.push(CaseReport::new(i, case.vocab, case.window, &r));
    }
    Ok(FamilyReport::from_cases(reports))
}

/// Enumerates random speculative windows (window up to `opts.spec_window`).
pub fn speculative_family(opts: &VerifyOptions) -> Result<FamilyReport, Error> {
    let mut rng = stream_rng(opts.seed, "exact-speculative");
    let mut reports = Vec::with_capacity(opts.cases);
    for (i, case) in random_cases(&mut rng, opts.cases, opts.vocab, opts.spec_window).into_iter().enumerate() {
        let r = verify_spec_decode(&case.draft, &case.judge, case.window, &case.prompt)?;
        reports.push(CaseReport::new(i, case.vocab, case.window, &r));
    }
    Ok(FamilyReport::from_cases(reports))
}

/// A draft/judge pair for the Monte Carlo check: depth-1 random tables with a
/// one-token prompt, so the first position depends on context.
///
/// Pairs are redrawn until the first position is informative: the judge
/// spreads over at least half the vocabulary and the draft differs from it.
pub fn monte_carlo_pair(seed: u64, vocab: usize) -> (TableModel, TableModel, Vec<TokenId>) {
    let mut rng = stream_rng(seed, "monte-carlo-models");
    loop {
        let draft = random_table_model(&mut rng, vocab, 1);
        let judge = random_table_model(&mut rng, vocab, 1);
        let prompt = vec![TokenId(rng.gen_range(0..vocab as u32))];
        let (q, p) = (draft.lookup(&prompt), judge.lookup(&prompt));
        if 2 * p.support_size() >= vocab && q != p {
            return (draft, judge, prompt);
        }
    }
}

/// Runs the engine's window `trials` times on one pair and compares the first
/// emitted token with the enumerated marginal.
pub fn monte_carlo_case(
    draft: &TableModel,
    judge: &TableModel,
    prompt: &[TokenId],
    lambda: usize,
    sampling: &SamplingOptions,
    trials: u64,
    seed: u64,
) -> Result<(MonteCarloReport, bool), Error> {
    let exact = enumerate_first_token(draft, judge, prompt)?;
    let reference = judged_decode_core::Distribution::new(exact.marginals[0].clone())?.to_f64();
    let mut rng = stream_rng(seed, "monte-carlo-draws");
    let report = monte_carlo_marginal(&reference, trials, &mut rng, |rng| {
        let trace = verify_window(draft, judge, prompt, lambda, Side::A, sampling, rng)?;
        Ok(trace.emitted[0])
    })?;
    Ok((report, exact.passed()))
}

pub fn run(opts: &VerifyOptions) -> Result<VerifyReport, Error> {
    let judgment = exact_family(opts)?;
    let speculative = speculative_family(opts)?;
    let (draft, judge, prompt) = monte_carlo_pair(opts.seed, opts.mc_vocab);
    let (mc, reference_is_judge) =
        monte_carlo_case(&draft, &judge, &prompt, opts.mc_lambda, &SamplingOptions::default(), opts.trials, opts.seed)?;
    let monte_carlo = MonteCarloSummary {
        vocab: opts.mc_vocab,
        lambda: opts.mc_lambda,
        trials: mc.trials,
        tv_distance: mc.tv_distance,
        tol: opts.tol,
        reference_is_judge,
        empirical: mc.empirical.probs().to_vec(),
        reference: mc.reference.probs().to_vec(),
    };
    let passed = judgment.all_passed() && speculative.all_passed() && monte_carlo.passed();
    Ok(VerifyReport { options: opts.clone(), judgment, speculative, monte_carlo, passed })
}
