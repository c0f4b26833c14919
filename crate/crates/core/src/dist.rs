//! Token probability distributions.
//!
//! [`Distribution`] is generic over its mass type so the same operations run in
//! two modes: `f64` for the sampling engine and [`BigRational`] for the oracle,
//! where identities such as "residual mass equals `1 - alpha`" must hold with
//! exact equality.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Sum tolerance for engine-side (in-process) float distributions.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

/// Float residual mass below which a residual is treated as empty.
pub const DEGENERATE_MASS: f64 = 1e-12;

/// Index of a token in the shared vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const fn new(id: u32) -> Self {
        TokenId(id)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(id: u32) -> Self {
        TokenId(id)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Errors raised by distribution arithmetic.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("distribution has no probability mass")]
    AllZeroMass,
    #[error("empty distribution")]
    Empty,
    #[error("distribution lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid probability {value} at token {index}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("token {token} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },
    #[error("duplicate token {0} in sparse distribution")]
    DuplicateToken(u32),
}

/// Scalar type a [`Distribution`] can be built from.
pub trait Mass:
    Clone
    + PartialOrd
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    /// Whether `sum` is close enough to one to count as normalized.
    fn is_unit_sum(sum: &Self) -> bool;

    /// Whether a residual mass is too small to renormalize.
    fn is_negligible(mass: &Self) -> bool;

    /// Lossy view for error messages and reports.
    fn approx(&self) -> f64;

    /// Rejects NaN and infinities.
    fn is_finite(&self) -> bool;
}

impl Mass for f64 {
    fn is_unit_sum(sum: &f64) -> bool {
        (sum - 1.0).abs() <= FLOAT_TOLERANCE
    }

    fn is_negligible(mass: &f64) -> bool {
        *mass < DEGENERATE_MASS
    }

    fn approx(&self) -> f64 {
        *self
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Mass for BigRational {
    fn is_unit_sum(sum: &BigRational) -> bool {
        sum.is_one()
    }

    fn is_negligible(mass: &BigRational) -> bool {
        mass.is_zero()
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite(&self) -> bool {
        true
    }
}

fn min_of<P: Mass>(a: &P, b: &P) -> P {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

fn abs_diff<P: Mass>(a: &P, b: &P) -> P {
    if a >= b {
        a.clone() - b.clone()
    } else {
        b.clone() - a.clone()
    }
}

fn total<P: Mass>(values: &[P]) -> P {
    values.iter().cloned().fold(P::zero(), |acc, v| acc + v)
}

/// A normalized probability vector indexed by token id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution<P = f64> {
    probs: Vec<P>,
}

/// Exact-rational distribution used by the oracle.
pub type ExactDistribution = Distribution<BigRational>;

impl<P: Mass> Distribution<P> {
    /// Validates `probs` as a distribution: non-empty, finite, non-negative,
    /// summing to one (exactly in rational mode, within [`FLOAT_TOLERANCE`]
    /// for floats).
    pub fn new(probs: Vec<P>) -> Result<Self, DistError> {
        check_entries(&probs)?;
        let sum = total(&probs);
        if !P::is_unit_sum(&sum) {
            return Err(DistError::NotNormalized { sum: sum.approx() });
        }
        Ok(Distribution { probs })
    }

    /// All mass on `token`.
    pub fn point(vocab_size: usize, token: TokenId) -> Result<Self, DistError> {
        if token.index() >= vocab_size {
            return Err(DistError::TokenOutOfRange { token: token.0, vocab_size });
        }
        let mut probs = vec![P::zero(); vocab_size];
        probs[token.index()] = P::one();
        Ok(Distribution { probs })
    }

    pub fn probs(&self) -> &[P] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<P> {
        self.probs
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    /// Probability of `token`; zero for out-of-range ids.
    pub fn prob(&self, token: TokenId) -> P {
        self.probs.get(token.index()).cloned().unwrap_or_else(P::zero)
    }

    /// Number of tokens with non-zero mass.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| !p.is_zero()).count()
    }

    /// Most likely token, lowest id on ties.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        TokenId(best as u32)
    }
}

fn check_entries<P: Mass>(probs: &[P]) -> Result<(), DistError> {
    if probs.is_empty() {
        return Err(DistError::Empty);
    }
    for (index, p) in probs.iter().enumerate() {
        if !p.is_finite() || *p < P::zero() {
            return Err(DistError::InvalidProbability { index, value: p.approx() });
        }
    }
    Ok(())
}

impl Distribution<f64> {
    /// Uniform over `vocab_size` tokens.
    pub fn uniform(vocab_size: usize) -> Result<Self, DistError> {
        if vocab_size == 0 {
            return Err(DistError::Empty);
        }
        Ok(Distribution { probs: vec![1.0 / vocab_size as f64; vocab_size] })
    }

    /// Exact rational image of the stored `f64` values.
    ///
    /// Every finite `f64` is a dyadic rational, so the conversion is lossless;
    /// it fails when the stored values do not sum to exactly one as rationals.
    pub fn to_exact(&self) -> Result<ExactDistribution, DistError> {
        let probs = self
            .probs
            .iter()
            .enumerate()
            .map(|(index, &p)| BigRational::from_float(p).ok_or(DistError::InvalidProbability { index, value: p }))
            .collect::<Result<Vec<_>, _>>()?;
        Distribution::new(probs)
    }
}

impl Distribution<BigRational> {
    /// Rational distribution from integer weights over a common denominator.
    pub fn from_ratios(numerators: &[i64], denominator: i64) -> Result<Self, DistError> {
        if denominator <= 0 {
            return Err(DistError::AllZeroMass);
        }
        let probs = numerators.iter().map(|&n| BigRational::new(BigInt::from(n), BigInt::from(denominator))).collect();
        Distribution::new(probs)
    }

    pub fn to_f64(&self) -> Distribution<f64> {
        Distribution { probs: self.probs.iter().map(Mass::approx).collect() }
    }
}

/// Scales non-negative weights to sum to one.
pub fn normalize<P: Mass>(raw: Vec<P>) -> Result<Distribution<P>, DistError> {
    check_entries(&raw)?;
    let sum = total(&raw);
    if sum.is_zero() {
        return Err(DistError::AllZeroMass);
    }
    let probs = raw.into_iter().map(|w| w / sum.clone()).collect();
    Ok(Distribution { probs })
}

/// `sum_t min(p(t), q(t))`: the probability that one drafted token survives.
pub fn acceptance_mass<P: Mass>(p: &Distribution<P>, q: &Distribution<P>) -> Result<P, DistError> {
    same_len(p, q)?;
    Ok(p.probs.iter().zip(&q.probs).fold(P::zero(), |acc, (a, b)| acc + min_of(a, b)))
}

/// Pointwise `max(0, p - q)` before normalization.
pub fn positive_part<P: Mass>(p: &Distribution<P>, q: &Distribution<P>) -> Result<Vec<P>, DistError> {
    same_len(p, q)?;
    Ok(p.probs.iter().zip(&q.probs).map(|(a, b)| if a > b { a.clone() - b.clone() } else { P::zero() }).collect())
}

/// Adjusted resampling distribution after a rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<P = f64> {
    /// `norm(max(0, p - q))`.
    pub distribution: Distribution<P>,
    /// `alpha = sum_t min(p(t), q(t))`.
    pub acceptance_mass: P,
    /// Unnormalized residual mass, `1 - alpha` for normalized inputs.
    pub residual_mass: P,
}

/// Builds `norm(max(0, p - q))` from judge `p` and draft `q`.
///
/// Fails with [`DistError::AllZeroMass`] when nothing is left over, which
/// happens exactly when `p == q` (or, in float mode, when the leftover is below
/// [`DEGENERATE_MASS`]).
pub fn residual<P: Mass>(p: &Distribution<P>, q: &Distribution<P>) -> Result<Residual<P>, DistError> {
    let acceptance = acceptance_mass(p, q)?;
    let raw = positive_part(p, q)?;
    let mass = total(&raw);
    if P::is_negligible(&mass) {
        return Err(DistError::AllZeroMass);
    }
    let probs = raw.into_iter().map(|w| w / mass.clone()).collect();
    Ok(Residual { distribution: Distribution { probs }, acceptance_mass: acceptance, residual_mass: mass })
}

/// Keeps the `k` most likely tokens (lower id wins ties) and renormalizes.
pub fn top_k_truncate<P: Mass>(d: &Distribution<P>, k: usize) -> Distribution<P> {
    let k = k.max(1);
    if k >= d.support_size() {
        return d.clone();
    }
    let mut order: Vec<usize> = (0..d.probs.len()).collect();
    // stable sort keeps ascending ids inside equal-probability runs
    order.sort_by(|&a, &b| d.probs[b].partial_cmp(&d.probs[a]).unwrap_or(core::cmp::Ordering::Equal));
    let mut kept = vec![P::zero(); d.probs.len()];
    for &i in order.iter().take(k) {
        kept[i] = d.probs[i].clone();
    }
    // the top k entries of a valid distribution always carry mass
    normalize(kept).expect("top-k entries carry mass")
}

/// Raises probabilities to `1 / temperature` and renormalizes.
pub fn apply_temperature(d: &Distribution<f64>, temperature: f64) -> Distribution<f64> {
    if temperature == 1.0 {
        return d.clone();
    }
    let exponent = 1.0 / temperature;
    let raw: Vec<f64> = d.probs.iter().map(|&p| if p > 0.0 { libm::pow(p, exponent) } else { 0.0 }).collect();
    match normalize(raw) {
        Ok(scaled) => scaled,
        // every positive entry underflowed; sharpening this far is a point mass
        Err(_) => Distribution::point(d.vocab_size(), d.argmax()).expect("argmax is in range"),
    }
}

/// Inverse-CDF sampling: the smallest token whose cumulative mass exceeds
/// `draw`. Boundaries are half-open, so equal `draw`s give equal tokens.
pub fn sample(d: &Distribution<f64>, draw: f64) -> TokenId {
    let mut cumulative = 0.0;
    let mut last_supported = 0;
    for (i, &p) in d.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last_supported = i;
        if draw < cumulative {
            return TokenId(i as u32);
        }
    }
    // rounding left the cumulative sum just under the draw
    TokenId(last_supported as u32)
}

/// Total variation distance `(1/2) sum_t |a(t) - b(t)|`.
///
/// # Panics
///
/// If the two distributions have different vocabulary sizes.
pub fn tv_distance<P: Mass>(a: &Distribution<P>, b: &Distribution<P>) -> P {
    assert_eq!(a.probs.len(), b.probs.len(), "tv_distance over different vocabularies");
    let l1 = a.probs.iter().zip(&b.probs).fold(P::zero(), |acc, (x, y)| acc + abs_diff(x, y));
    l1 / (P::one() + P::one())
}

fn same_len<P>(a: &Distribution<P>, b: &Distribution<P>) -> Result<(), DistError> {
    if a.probs.len() != b.probs.len() {
        return Err(DistError::LengthMismatch { left: a.probs.len(), right: b.probs.len() });
    }
    Ok(())
}

/// Top-k style vector of `(token, probability)` pairs, as remote backends send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDistribution {
    entries: Vec<(TokenId, f64)>,
    vocab_size: usize,
}

impl SparseDistribution {
    pub fn new(entries: Vec<(TokenId, f64)>, vocab_size: usize) -> Result<Self, DistError> {
        if vocab_size == 0 {
            return Err(DistError::Empty);
        }
        let mut seen = vec![false; vocab_size];
        for (index, &(token, p)) in entries.iter().enumerate() {
            if token.index() >= vocab_size {
                return Err(DistError::TokenOutOfRange { token: token.0, vocab_size });
            }
            if core::mem::replace(&mut seen[token.index()], true) {
                return Err(DistError::DuplicateToken(token.0));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(DistError::InvalidProbability { index, value: p });
            }
        }
        Ok(SparseDistribution { entries, vocab_size })
    }

    pub fn entries(&self) -> &[(TokenId, f64)] {
        &self.entries
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

/// Expands a sparse vector to full length; missing ids get zero and the
/// listed mass is renormalized.
pub fn densify(s: &SparseDistribution) -> Result<Distribution<f64>, DistError> {
    let mut raw = vec![0.0; s.vocab_size];
    for &(token, p) in &s.entries {
        raw[token.index()] = p;
    }
    normalize(raw)
}
