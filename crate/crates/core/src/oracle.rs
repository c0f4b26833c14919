//! Brute-force verification of the draft/judge sampling step.
//!
//! The enumerators here never call the engine. They walk every drafted-token
//! path in exact rational arithmetic and integrate the acceptance test in
//! closed form, `P(accept t) = q(t) * min(1, p(t)/q(t))`, so the result is the
//! exact distribution of what one window emits. That distribution is then
//! compared against the judge's own autoregressive distribution.
//!
//! [`monte_carlo_marginal`] is the statistical counterpart: it runs the real
//! engine step many times and measures total variation distance against an
//! exact reference.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::dist::{self, normalize, Distribution, ExactDistribution, Mass, TokenId};
use crate::source::{PrefixedSource, ProbabilitySource, TableModel};
use crate::Error;

/// Largest vocabulary for joint (multi-position) enumeration.
pub const MAX_JOINT_VOCAB: usize = 8;
/// Largest window for joint enumeration.
pub const MAX_JOINT_WINDOW: usize = 3;
/// Largest vocabulary for first-token enumeration.
pub const MAX_SINGLE_VOCAB: usize = 16;

type Rat = BigRational;

/// Exact probabilities over token sequences.
pub type ExactJoint = BTreeMap<Vec<TokenId>, Rat>;

/// A source that can report its next-token distribution as exact rationals.
pub trait ExactSource {
    fn vocab_size(&self) -> usize;
    fn exact_next(&self, ctx: &[TokenId]) -> Result<ExactDistribution, Error>;
}

impl<S: ExactSource + ?Sized> ExactSource for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn exact_next(&self, ctx: &[TokenId]) -> Result<ExactDistribution, Error> {
        (**self).exact_next(ctx)
    }
}

impl ExactSource for TableModel {
    fn vocab_size(&self) -> usize {
        ProbabilitySource::vocab_size(self)
    }

    /// Fails unless the stored floats sum to exactly one as rationals.
    fn exact_next(&self, ctx: &[TokenId]) -> Result<ExactDistribution, Error> {
        Ok(self.lookup(ctx).to_exact()?)
    }
}

impl<S: ExactSource + ProbabilitySource> ExactSource for PrefixedSource<S> {
    fn vocab_size(&self) -> usize {
        ExactSource::vocab_size(self.inner())
    }

    fn exact_next(&self, ctx: &[TokenId]) -> Result<ExactDistribution, Error> {
        let mut full = self.prefix().to_vec();
        full.extend_from_slice(ctx);
        self.inner().exact_next(&full)
    }
}

/// Position-indexed distributions: the `i`-th query (context of length `i`)
/// gets the `i`-th distribution, whatever the tokens are.
#[derive(Debug, Clone)]
pub struct PositionalSource {
    dists: Vec<ExactDistribution>,
}

impl PositionalSource {
    pub fn new(dists: Vec<ExactDistribution>) -> Result<Self, Error> {
        let vocab = dists
            .first()
            .map(Distribution::vocab_size)
            .ok_or_else(|| Error::InvalidModel("positional source needs at least one distribution".into()))?;
        if dists.iter().any(|d| d.vocab_size() != vocab) {
            return Err(Error::InvalidModel("positional distributions differ in vocabulary".into()));
        }
        Ok(PositionalSource { dists })
    }
}

impl ExactSource for PositionalSource {
    fn vocab_size(&self) -> usize {
        self.dists[0].vocab_size()
    }

    fn exact_next(&self, ctx: &[TokenId]) -> Result<ExactDistribution, Error> {
        self.dists.get(ctx.len()).cloned().ok_or_else(|| {
            Error::InvalidModel(alloc::format!("no positional distribution for position {}", ctx.len() + 1))
        })
    }
}

/// Exact outcome of enumerating one window against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationReport {
    /// Number of positions the joint covers.
    pub horizon: usize,
    /// Emitted tokens, extended with judge samples up to `horizon`.
    pub joint: ExactJoint,
    /// The judge's autoregressive joint over `horizon` tokens.
    pub reference_joint: ExactJoint,
    /// Per-position marginals of `joint`.
    pub marginals: Vec<Vec<Rat>>,
    pub reference_marginals: Vec<Vec<Rat>>,
    /// `P(accepted at position 1, t = t')`.
    pub accepted_first: Vec<Rat>,
    /// `P(rejected at position 1, t = t')`.
    pub rejected_first: Vec<Rat>,
    /// `alpha` at the first position.
    pub acceptance_probability: Rat,
    /// Every visited node satisfied `accepted + rejected = p` with
    /// `accepted = min(q, p)` and `rejected = p - min(q, p)`.
    pub partition_holds: bool,
    pub max_abs_deviation: f64,
    pub exact_equal: bool,
}

impl EnumerationReport {
    pub fn passed(&self) -> bool {
        self.exact_equal && self.partition_holds
    }
}

struct WindowEnumeration {
    outcomes: Vec<(Vec<TokenId>, Rat)>,
    accepted_first: Vec<Rat>,
    rejected_first: Vec<Rat>,
    alpha_first: Rat,
    partition_holds: bool,
}

fn rat_min(a: &Rat, b: &Rat) -> Rat {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

fn extend(ctx: &[TokenId], tail: &[TokenId]) -> Vec<TokenId> {
    let mut v = ctx.to_vec();
    v.extend_from_slice(tail);
    v
}

fn check_same_vocab<D: ExactSource + ?Sized, J: ExactSource + ?Sized>(draft: &D, judge: &J) -> Result<usize, Error> {
    if draft.vocab_size() != judge.vocab_size() {
        return Err(Error::Dist(dist::DistError::LengthMismatch {
            left: draft.vocab_size(),
            right: judge.vocab_size(),
        }));
    }
    Ok(judge.vocab_size())
}

/// Every emission of one window with its exact probability, visiting at most
/// `max_depth` drafted positions (`window` for a full enumeration).
fn enumerate_window<D, J>(
    draft: &D,
    judge: &J,
    ctx: &[TokenId],
    window: usize,
    max_depth: usize,
) -> Result<WindowEnumeration, Error>
where
    D: ExactSource + ?Sized,
    J: ExactSource + ?Sized,
{
    let vocab = check_same_vocab(draft, judge)?;
    let mut out = WindowEnumeration {
        outcomes: Vec::new(),
        accepted_first: vec![Rat::zero(); vocab],
        rejected_first: vec![Rat::zero(); vocab],
        alpha_first: Rat::zero(),
        partition_holds: true,
    };
    // (accepted drafts so far, probability of reaching this node)
    let mut stack: Vec<(Vec<TokenId>, Rat)> = vec![(Vec::new(), Rat::one())];
    while let Some((accepted, reach)) = stack.pop() {
        let here = extend(ctx, &accepted);
        let p = judge.exact_next(&here)?;
        let depth = accepted.len();
        if depth == window {
            for (t, pt) in p.probs().iter().enumerate() {
                if !pt.is_zero() {
                    out.outcomes.push((extend(&accepted, &[TokenId(t as u32)]), reach.clone() * pt.clone()));
                }
            }
            continue;
        }
        let q = draft.exact_next(&here)?;

        let mut accept = vec![Rat::zero(); vocab];
        let mut reject_total = Rat::zero();
        for (t, qt) in q.probs().iter().enumerate() {
            if qt.is_zero() {
                continue;
            }
            let pt = &p.probs()[t];
            let keep = rat_min(&Rat::one(), &(pt.clone() / qt.clone()));
            accept[t] = qt.clone() * keep.clone();
            reject_total += qt.clone() * (Rat::one() - keep);
        }
        let reject: Vec<Rat> = if reject_total.is_zero() {
            vec![Rat::zero(); vocab]
        } else {
            let adjusted = dist::residual(&p, &q)?;
            adjusted.distribution.probs().iter().map(|r| reject_total.clone() * r.clone()).collect()
        };

        for t in 0..vocab {
            let (pt, qt) = (&p.probs()[t], &q.probs()[t]);
            let min = rat_min(pt, qt);
            let ok = accept[t] == min
                && reject[t] == pt.clone() - min.clone()
                && accept[t].clone() + reject[t].clone() == *pt;
            out.partition_holds &= ok;
        }
        if depth == 0 {
            out.accepted_first = accept.clone();
            out.rejected_first = reject.clone();
            out.alpha_first = accept.iter().cloned().fold(Rat::zero(), |a, b| a + b);
        }

        for (t, r) in reject.iter().enumerate() {
            if !r.is_zero() {
                out.outcomes.push((extend(&accepted, &[TokenId(t as u32)]), reach.clone() * r.clone()));
            }
        }
        if max_depth == window || depth + 1 < max_depth {
            for (t, a) in accept.iter().enumerate() {
                if !a.is_zero() {
                    stack.push((extend(&accepted, &[TokenId(t as u32)]), reach.clone() * a.clone()));
                }
            }
        } else {
            // truncated walk: record accepted first tokens as length-1 outcomes
            for (t, a) in accept.iter().enumerate() {
                if !a.is_zero() {
                    out.outcomes.push((extend(&accepted, &[TokenId(t as u32)]), reach.clone() * a.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// The autoregressive joint of `source` over the next `horizon` tokens.
pub fn autoregressive_joint<S: ExactSource + ?Sized>(
    source: &S,
    ctx: &[TokenId],
    horizon: usize,
) -> Result<ExactJoint, Error> {
    let mut joint = ExactJoint::new();
    let mut stack: Vec<(Vec<TokenId>, Rat)> = vec![(Vec::new(), Rat::one())];
    while let Some((seq, mass)) = stack.pop() {
        if seq.len() == horizon {
            add_mass(&mut joint, seq, mass);
            continue;
        }
        let d = source.exact_next(&extend(ctx, &seq))?;
        for (t, pt) in d.probs().iter().enumerate() {
            if !pt.is_zero() {
                stack.push((extend(&seq, &[TokenId(t as u32)]), mass.clone() * pt.clone()));
            }
        }
    }
    Ok(joint)
}

fn add_mass(joint: &mut ExactJoint, seq: Vec<TokenId>, mass: Rat) {
    let slot = joint.entry(seq).or_insert_with(Rat::zero);
    *slot = slot.clone() + mass;
}

fn marginals(joint: &ExactJoint, horizon: usize, vocab: usize) -> Vec<Vec<Rat>> {
    let mut m = vec![vec![Rat::zero(); vocab]; horizon];
    for (seq, mass) in joint {
        for (pos, t) in seq.iter().enumerate().take(horizon) {
            m[pos][t.index()] = m[pos][t.index()].clone() + mass.clone();
        }
    }
    m
}

fn max_deviation(a: &ExactJoint, b: &ExactJoint) -> f64 {
    let zero = Rat::zero();
    a.keys()
        .chain(b.keys())
        .map(|k| {
            let x = a.get(k).unwrap_or(&zero);
            let y = b.get(k).unwrap_or(&zero);
            let d = if x > y { x.clone() - y.clone() } else { y.clone() - x.clone() };
            d.approx()
        })
        .fold(0.0, f64::max)
}

fn guard(vocab: usize, window: usize, max_vocab: usize, max_window: usize) -> Result<(), Error> {
    if vocab > max_vocab || window > max_window || window == 0 {
        return Err(Error::EnumerationTooLarge { vocab_size: vocab, window, max_vocab, max_window });
    }
    Ok(())
}

fn build_report(
    enumeration: WindowEnumeration,
    joint: ExactJoint,
    reference_joint: ExactJoint,
    horizon: usize,
    vocab: usize,
) -> EnumerationReport {
    let exact_equal = joint == reference_joint;
    EnumerationReport {
        horizon,
        marginals: marginals(&joint, horizon, vocab),
        reference_marginals: marginals(&reference_joint, horizon, vocab),
        max_abs_deviation: max_deviation(&joint, &reference_joint),
        exact_equal,
        joint,
        reference_joint,
        accepted_first: enumeration.accepted_first,
        rejected_first: enumeration.rejected_first,
        acceptance_probability: enumeration.alpha_first,
        partition_holds: enumeration.partition_holds,
    }
}

/// Exact distribution of one `window`-token judgment step from `ctx`.
///
/// Each emission (reserved drafts plus the final token) is extended with
/// judge samples to `window + 1` tokens, so the joint is directly comparable
/// with the judge's autoregressive joint of the same length.
pub fn enumerate_step<D, J>(draft: &D, judge: &J, ctx: &[TokenId], window: usize) -> Result<EnumerationReport, Error>
where
    D: ExactSource + ?Sized,
    J: ExactSource + ?Sized,
{
    let vocab = check_same_vocab(draft, judge)?;
    guard(vocab, window, MAX_JOINT_VOCAB, MAX_JOINT_WINDOW)?;
    let horizon = window + 1;
    let enumeration = enumerate_window(draft, judge, ctx, window, window)?;
    let mut joint = ExactJoint::new();
    for (emitted, mass) in &enumeration.outcomes {
        let rest = autoregressive_joint(judge, &extend(ctx, emitted), horizon - emitted.len())?;
        for (tail, m) in rest {
            add_mass(&mut joint, extend(emitted, &tail), mass.clone() * m);
        }
    }
    let reference = autoregressive_joint(judge, ctx, horizon)?;
    Ok(build_report(enumeration, joint, reference, horizon, vocab))
}

/// Exact marginal of the first emitted token only. Cheap enough for larger
/// vocabularies because only the first position has to be integrated.
pub fn enumerate_first_token<D, J>(draft: &D, judge: &J, ctx: &[TokenId]) -> Result<EnumerationReport, Error>
where
    D: ExactSource + ?Sized,
    J: ExactSource + ?Sized,
{
    let vocab = check_same_vocab(draft, judge)?;
    guard(vocab, 1, MAX_SINGLE_VOCAB, usize::MAX)?;
    let enumeration = enumerate_window(draft, judge, ctx, usize::MAX, 1)?;
    let mut joint = ExactJoint::new();
    for (emitted, mass) in &enumeration.outcomes {
        add_mass(&mut joint, emitted[..1].to_vec(), mass.clone());
    }
    let reference = autoregressive_joint(judge, ctx, 1)?;
    Ok(build_report(enumeration, joint, reference, 1, vocab))
}

/// [`enumerate_step`] over position-indexed draft/judge distributions:
/// `q_list[i]` and `p_list[i]` are used at position `i + 1`.
pub fn enumerate_step_marginal(
    q_list: Vec<ExactDistribution>,
    p_list: Vec<ExactDistribution>,
    window: usize,
) -> Result<EnumerationReport, Error> {
    if q_list.len() < window || p_list.len() < window + 1 {
        return Err(Error::InvalidModel(alloc::format!(
            "window {window} needs {window} draft and {} judge distributions",
            window + 1
        )));
    }
    let draft = PositionalSource::new(q_list)?;
    let judge = PositionalSource::new(p_list)?;
    enumerate_step(&draft, &judge, &[], window)
}

/// Standard speculative decoding is the same window with a target model as
/// judge; the emitted window must follow the target exactly.
pub fn verify_spec_decode<D, T>(
    draft: &D,
    target: &T,
    window: usize,
    prompt: &[TokenId],
) -> Result<EnumerationReport, Error>
where
    D: ExactSource + ?Sized,
    T: ExactSource + ?Sized,
{
    enumerate_step(draft, target, prompt, window)
}

/// Exact distribution of the first `horizon` tokens of a multi-step run.
///
/// Step `k` uses `roles[k % roles.len()]` as its `(draft, judge)` pair, which
/// covers both fixed and alternating schedules. Eos is not modelled.
pub fn enumerate_rollout(
    roles: &[(&dyn ExactSource, &dyn ExactSource)],
    ctx: &[TokenId],
    window: usize,
    horizon: usize,
) -> Result<ExactJoint, Error> {
    if roles.is_empty() {
        return Err(Error::InvalidConfig("rollout needs at least one role pair".into()));
    }
    let vocab = check_same_vocab(roles[0].0, roles[0].1)?;
    guard(vocab, window, MAX_JOINT_VOCAB, MAX_JOINT_WINDOW)?;
    let mut joint = ExactJoint::new();
    let mut stack: Vec<(usize, Vec<TokenId>, Rat)> = vec![(0, Vec::new(), Rat::one())];
    while let Some((step, emitted, mass)) = stack.pop() {
        if emitted.len() >= horizon {
            add_mass(&mut joint, emitted[..horizon].to_vec(), mass);
            continue;
        }
        let (draft, judge) = roles[step % roles.len()];
        let enumeration = enumerate_window(draft, judge, &extend(ctx, &emitted), window, window)?;
        for (out, m) in enumeration.outcomes {
            stack.push((step + 1, extend(&emitted, &out), mass.clone() * m));
        }
    }
    Ok(joint)
}

/// Empirical first-token frequencies from the engine against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub empirical: Distribution,
    pub reference: Distribution,
    pub tv_distance: f64,
}

/// Calls `runner` `trials` times, tallies the returned tokens and reports the
/// total variation distance to `reference`.
pub fn monte_carlo_marginal<R, F>(
    reference: &Distribution,
    trials: u64,
    rng: &mut R,
    mut runner: F,
) -> Result<MonteCarloReport, Error>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<TokenId, Error>,
{
    if trials == 0 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least one trial".into()));
    }
    let mut counts = vec![0u64; reference.vocab_size()];
    for _ in 0..trials {
        let t = runner(rng)?;
        let slot = counts
            .get_mut(t.index())
            .ok_or(Error::Dist(dist::DistError::TokenOutOfRange { token: t.0, vocab_size: reference.vocab_size() }))?;
        *slot += 1;
    }
    let empirical = normalize(counts.iter().map(|&c| c as f64).collect())?;
    let tv_distance = dist::tv_distance(&empirical, reference);
    Ok(MonteCarloReport { trials, empirical, reference: reference.clone(), tv_distance })
}

/// Random distribution whose probabilities are multiples of `2^-bits`, so it
/// converts to rationals exactly and sums to exactly one.
///
/// A quarter of draws concentrate on a random subset of tokens and one in
/// eight is a point mass, so disjoint and partially overlapping supports show
/// up in every family.
pub fn random_dyadic_distribution<R: Rng + ?Sized>(rng: &mut R, vocab: usize, bits: u32) -> Distribution {
    let units = 1u64 << bits;
    let shape: u32 = rng.gen_range(0..8);
    let allowed: Vec<usize> = match shape {
        0 => vec![rng.gen_range(0..vocab)],
        1 | 2 => {
            let subset: Vec<usize> = (0..vocab).filter(|_| rng.gen_bool(0.5)).collect();
            if subset.is_empty() {
                vec![rng.gen_range(0..vocab)]
            } else {
                subset
            }
        }
        _ => (0..vocab).collect(),
    };
    let mut counts = vec![0u64; vocab];
    for _ in 0..units {
        counts[allowed[rng.gen_range(0..allowed.len())]] += 1;
    }
    let scale = units as f64;
    Distribution::new(counts.iter().map(|&c| c as f64 / scale).collect()).expect("dyadic weights sum to one")
}

/// Table over every context of length `<= depth` with random dyadic entries.
pub fn random_table_model<R: Rng + ?Sized>(rng: &mut R, vocab: usize, depth: usize) -> TableModel {
    let root = random_dyadic_distribution(rng, vocab, 5);
    let mut model = TableModel::new(depth, root.clone());
    model.insert(Vec::new(), root).expect("root key fits");
    let mut frontier: Vec<Vec<TokenId>> = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for ctx in &frontier {
            for t in 0..vocab as u32 {
                let key = extend(ctx, &[TokenId(t)]);
                model.insert(key.clone(), random_dyadic_distribution(rng, vocab, 5)).expect("key fits depth");
                next.push(key);
            }
        }
        frontier = next;
    }
    model
}

/// A random draft/judge pair from the verification family.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub draft: TableModel,
    pub judge: TableModel,
    pub window: usize,
    pub vocab: usize,
    pub prompt: Vec<TokenId>,
}

/// `count` seeded cases with vocabulary in `2..=max_vocab`, window in
/// `1..=max_window`, table depth in `0..=2` and a prompt of length `0..=1`.
pub fn random_cases<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    max_vocab: usize,
    max_window: usize,
) -> Vec<RandomCase> {
    (0..count)
        .map(|_| {
            let vocab = rng.gen_range(2..=max_vocab.max(2));
            let window = rng.gen_range(1..=max_window.max(1));
            let depth = rng.gen_range(0..=2);
            let draft = random_table_model(rng, vocab, depth);
            let judge = random_table_model(rng, vocab, depth);
            let prompt = if rng.gen_bool(0.5) { vec![TokenId(rng.gen_range(0..vocab as u32))] } else { Vec::new() };
            RandomCase { draft, judge, window, vocab, prompt }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    fn e(nums: &[i64], den: i64) -> ExactDistribution {
        Distribution::from_ratios(nums, den).unwrap()
    }

    #[test]
    fn worked_pair_marginal_and_mass_identities() {
        let report =
            enumerate_step_marginal(vec![e(&[5, 3, 2], 10)], vec![e(&[2, 5, 3], 10), e(&[1, 1, 8], 10)], 1).unwrap();
        assert_eq!(report.marginals[0], vec![r(2, 10), r(5, 10), r(3, 10)]);
        assert_eq!(report.acceptance_probability, r(7, 10));
        assert_eq!(report.accepted_first, vec![r(2, 10), r(3, 10), r(2, 10)]);
        assert_eq!(report.rejected_first, vec![r(0, 1), r(2, 10), r(1, 10)]);
        assert!(report.passed());
    }

    #[test]
    fn identical_positions_accept_with_certainty() {
        let q = e(&[1, 2, 1], 4);
        let report = enumerate_step_marginal(vec![q.clone(); 2], vec![q.clone(); 3], 2).unwrap();
        assert!(report.passed());
        assert_eq!(report.acceptance_probability, Rat::one());
        assert!(report.rejected_first.iter().all(Zero::is_zero));
    }

    #[test]
    fn disjoint_one_hots_always_reject() {
        let q = e(&[1, 0], 1);
        let p = e(&[0, 1], 1);
        let report = enumerate_step_marginal(vec![q], vec![p.clone(), p], 1).unwrap();
        assert!(report.passed());
        assert!(report.acceptance_probability.is_zero());
        assert_eq!(report.marginals[0], vec![Rat::zero(), Rat::one()]);
    }

    #[test]
    fn guards_reject_large_enumerations() {
        let big = TableModel::new(0, Distribution::uniform(16).unwrap());
        assert!(matches!(enumerate_step(&big, &big, &[], 1), Err(Error::EnumerationTooLarge { .. })));
        let small = TableModel::new(0, Distribution::new(vec![0.5, 0.5]).unwrap());
        assert!(matches!(enumerate_step(&small, &small, &[], 4), Err(Error::EnumerationTooLarge { .. })));
        assert!(enumerate_first_token(&big, &big, &[]).is_ok());
    }

    #[test]
    fn random_family_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in random_cases(&mut rng, 25, 4, 3) {
            let report = enumerate_step(&case.draft, &case.judge, &case.prompt, case.window).unwrap();
            assert!(report.passed(), "case failed: deviation {}", report.max_abs_deviation);
            let first = enumerate_first_token(&case.draft, &case.judge, &case.prompt).unwrap();
            assert!(first.passed());
        }
    }

    #[test]
    fn rollout_of_identical_roles_is_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_table_model(&mut rng, 3, 1);
        let roles: [(&dyn ExactSource, &dyn ExactSource); 1] = [(&m, &m)];
        let joint = enumerate_rollout(&roles, &[], 2, 3).unwrap();
        assert_eq!(joint, autoregressive_joint(&m, &[], 3).unwrap());
    }

    #[test]
    fn monte_carlo_trivial_bound() {
        let reference = Distribution::new(vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = monte_carlo_marginal(&reference, 1, &mut rng, |_| Ok(TokenId(0))).unwrap();
        assert!(report.tv_distance <= 1.0);
        assert_eq!(report.tv_distance, 0.5);
        assert!(monte_carlo_marginal(&reference, 0, &mut rng, |_| Ok(TokenId(0))).is_err());
    }
}
