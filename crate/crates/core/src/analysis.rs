//! Closed-form quantities: the exact inclusion probability, independence and
//! sample-size thresholds, the block partition around `t·u/m`, moment and
//! tail bounds, and the constant of the `d = 2` deviation series.
//!
//! Real-valued formulas are evaluated in `f64`. The only exact arithmetic is
//! the rational inclusion probability.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{precondition, Result};
use crate::sketch::DkmwParams;

/// Multiplier in `r = 48·ln(1/τ)` for median amplification. This is the
/// textbook constant for estimators that land in the target interval with
/// probability at least 3/4; it is not derived from the construction.
pub const MEDIAN_BUDGET_FACTOR: f64 = 48.0;

/// Default number of series terms summed before the analytic tail is added.
pub const DEFAULT_SERIES_TRUNCATION: u64 = 1_000_000;

/// `C(k, d) / C(n, d)` in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactProbability {
    ratio: BigRational,
}

impl ExactProbability {
    pub fn from_ratio(ratio: BigRational) -> Self {
        Self { ratio }
    }

    pub fn numerator(&self) -> &BigInt {
        self.ratio.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.ratio.denom()
    }

    pub fn ratio(&self) -> &BigRational {
        &self.ratio
    }

    pub fn real_value(&self) -> f64 {
        self.ratio.to_f64().unwrap_or(f64::NAN)
    }
}

impl std::fmt::Display for ExactProbability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator(), self.denominator())
    }
}

/// Probability that a fixed `d`-subset lands in the bottom `k` of `n`
/// elements under a truly random function, via the product
/// `(k/n)·((k-1)/(n-1))···((k-d+1)/(n-d+1))`.
pub fn exact_probability(n: u64, k: u64, d: u64) -> Result<ExactProbability> {
    if !(1 <= d && d <= k && k <= n) {
        return Err(precondition(format!(
            "need 1 <= d <= k <= n, got n = {n}, k = {k}, d = {d}"
        )));
    }
    let ratio = (0..d).fold(BigRational::one(), |acc, j| {
        acc * BigRational::new(BigInt::from(k - j), BigInt::from(n - j))
    });
    Ok(ExactProbability { ratio })
}

/// Independence degrees for the tail lemma (`2d + 2`) and for the full
/// family guarantee (`3d + 2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndependenceLevels {
    pub lemma_l: u64,
    pub theorem_l: u64,
}

pub fn required_independence(d: u64) -> Result<IndependenceLevels> {
    if d < 2 {
        return Err(precondition(format!("d = {d} must be at least 2")));
    }
    Ok(IndependenceLevels {
        lemma_l: 2 * d + 2,
        theorem_l: 3 * d + 2,
    })
}

fn check_threshold_args(d: u64, epsilon: f64, c: f64, l: u64) -> Result<()> {
    if d == 0 {
        return Err(precondition("d must be positive"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(precondition(format!("epsilon = {epsilon} not in (0, 1)")));
    }
    if !(c.is_finite() && c >= 1.0) {
        return Err(precondition(format!("series constant c = {c} must be >= 1")));
    }
    if !l.is_multiple_of(2) {
        return Err(precondition(format!("l = {l} must be even")));
    }
    if l < 2 * d + 2 {
        return Err(precondition(format!("l = {l} is below 2d + 2 = {}", 2 * d + 2)));
    }
    Ok(())
}

/// `d - 1 + 2·8^(2/l)·(6l)^(1+1/l) / (ε/c)²`.
pub fn k_threshold(d: u64, epsilon: f64, c: f64, l: u64) -> Result<f64> {
    check_threshold_args(d, epsilon, c, l)?;
    let l = l as f64;
    let eps_prime = epsilon / c;
    Ok((d - 1) as f64 + 2.0 * 8f64.powf(2.0 / l) * (6.0 * l).powf(1.0 + 1.0 / l) / (eps_prime * eps_prime))
}

/// Smallest integer `k` strictly above [`k_threshold`].
pub fn required_k(d: u64, epsilon: f64, c: f64, l: u64) -> Result<u64> {
    let threshold = k_threshold(d, epsilon, c, l)?;
    // A few ulps of upward slack so a threshold that is mathematically an
    // integer but rounds just below it still yields a strictly larger k.
    let padded = threshold * (1.0 + 8.0 * f64::EPSILON);
    Ok(padded.floor() as u64 + 1)
}

/// A half-open real interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval { lo: 0.0, hi: 0.0 };

    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v < self.hi
    }
}

/// Blocks `b_i = [(1 + ε(i-1))·t·u/m, (1 + εi)·t·u/m)` clipped to `[0, u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockPartition {
    epsilon: f64,
    t: u64,
    m: u64,
    u: u64,
    center: f64,
}

impl BlockPartition {
    pub fn new(params: &DkmwParams) -> Self {
        Self::from_parts(params.epsilon(), params.t(), params.m(), params.u())
    }

    /// Unchecked construction; `m > 0` and `ε > 0` are assumed.
    pub fn from_parts(epsilon: f64, t: u64, m: u64, u: u64) -> Self {
        Self {
            epsilon,
            t,
            m,
            u,
            center: t as f64 * u as f64 / m as f64,
        }
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// `(1 + εj)·t·u/m`: upper edge of `b_j` and lower edge of `b_{j+1}`.
    #[inline]
    pub fn edge(&self, j: i64) -> f64 {
        (1.0 + self.epsilon * j as f64) * self.center
    }

    pub fn raw_bounds(&self, i: i64) -> Interval {
        Interval {
            lo: self.edge(i - 1),
            hi: self.edge(i),
        }
    }

    pub fn bounds(&self, i: i64) -> Interval {
        let raw = self.raw_bounds(i);
        let clipped = Interval {
            lo: raw.lo.max(0.0),
            hi: raw.hi.min(self.u as f64),
        };
        if clipped.is_empty() {
            Interval::EMPTY
        } else {
            clipped
        }
    }

    pub fn block_of(&self, value: u64) -> i64 {
        let v = value as f64;
        let mut i = ((v / self.center - 1.0) / self.epsilon).floor() as i64 + 1;
        while v < self.edge(i - 1) {
            i -= 1;
        }
        while v >= self.edge(i) {
            i += 1;
        }
        i
    }

    /// Indices of the first and last blocks that meet `[0, u)`.
    pub fn index_range(&self) -> (i64, i64) {
        (self.block_of(0), self.block_of(self.u.saturating_sub(1)))
    }
}

pub fn block_boundaries(i: i64, params: &DkmwParams) -> Interval {
    BlockPartition::new(params).bounds(i)
}

pub fn block_of(value: u64, params: &DkmwParams) -> i64 {
    BlockPartition::new(params).block_of(value)
}

/// `8·(6l)^((l+1)/2)·E^(l/2)`, the bound on `E|Z - E|^l` for a sum of
/// `l`-wise independent indicators with mean `E`.
pub fn moment_bound(l: u64, expected: f64) -> Result<f64> {
    if l < 2 || !l.is_multiple_of(2) {
        return Err(precondition(format!("moment order l = {l} must be even and >= 2")));
    }
    if expected.is_nan() || expected <= 0.0 {
        return Err(precondition(format!("expected value {expected} must be positive")));
    }
    let l = l as f64;
    Ok(8.0 * (6.0 * l).powf((l + 1.0) / 2.0) * expected.powf(l / 2.0))
}

/// `1 / i^(d+1)`; infinite for `i = 0`.
pub fn tail_bound_rhs(i: u64, d: u64) -> f64 {
    if i == 0 {
        return f64::INFINITY;
    }
    (i as f64).powi(-((d + 1) as i32))
}

/// Partial sum, to `truncation` terms, of the normalized `d = 2` deviation
/// series:
///
/// `2·Σ_{i≥1} |ε(2i-1) - 2|/i³ + 2·Σ_{i≥2} |ε(2i-1) + 2|/i³ + (2 + ε)`.
///
/// The trailing `2 + ε` is the two central-block terms divided by `ε·k/n·(k-1)/(n-1)`
/// in the large-`n` limit where `((k-1)/(n-2))²` meets `k(k-1)/(n(n-1))`.
/// Non-decreasing in `truncation`; see [`delta_series_tail_bound`] for the
/// remainder.
pub fn delta_series_constant(epsilon: f64, truncation: u64) -> Result<f64> {
    if truncation < 1000 {
        return Err(precondition(format!("truncation {truncation} is below 1000")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(precondition(format!("epsilon = {epsilon} not in (0, 1)")));
    }
    let mut below = 0.0;
    let mut above = 0.0;
    for i in 1..=truncation {
        let x = i as f64;
        let cube = x * x * x;
        let spread = epsilon * (2.0 * x - 1.0);
        below += (spread - 2.0).abs() / cube;
        if i >= 2 {
            above += (spread + 2.0) / cube;
        }
    }
    Ok(2.0 * (below + above) + 2.0 + epsilon)
}

/// Upper bound on the series terms past `truncation`:
/// `4·(2ε/N + 1/N²)`, from `Σ_{i>N} 1/i² ≤ 1/N` and `Σ_{i>N} 1/i³ ≤ 1/(2N²)`.
pub fn delta_series_tail_bound(epsilon: f64, truncation: u64) -> f64 {
    let n = truncation as f64;
    4.0 * (2.0 * epsilon / n + 1.0 / (n * n))
}

/// The constant `c` used when none is configured: the truncated series plus
/// its tail bound, rounded up to an integer.
pub fn default_series_constant(epsilon: f64) -> Result<f64> {
    let partial = delta_series_constant(epsilon, DEFAULT_SERIES_TRUNCATION)?;
    Ok((partial + delta_series_tail_bound(epsilon, DEFAULT_SERIES_TRUNCATION)).ceil())
}

/// `(t/m)^d·(1 + εi)^d`: the probability that `d` independent uniform values
/// fall below the upper edge of block `i`, in units of the universe.
pub fn block_level(params: &DkmwParams, i: i64) -> f64 {
    let base = params.t() as f64 / params.m() as f64 * (1.0 + params.epsilon() * i as f64);
    base.powi(params.d() as i32)
}

/// Block masses `p_i` for consecutive indices starting at `first_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMasses {
    pub first_index: i64,
    pub masses: Vec<f64>,
}

impl BlockMasses {
    fn last_index(&self) -> i64 {
        self.first_index + self.masses.len() as i64 - 1
    }

    fn mass(&self, i: i64) -> f64 {
        if i < self.first_index || i > self.last_index() {
            0.0
        } else {
            self.masses[(i - self.first_index) as usize]
        }
    }

    /// `Σ_i p_i·(f(i) - baseline)`.
    pub fn direct_sum(&self, f: impl Fn(i64) -> f64, baseline: f64) -> f64 {
        (self.first_index..=self.last_index())
            .map(|i| self.mass(i) * (f(i) - baseline))
            .sum()
    }

    /// The same quantity regrouped by cumulative masses:
    ///
    /// `Σ_{i≤-1} P[≤i]·(f(i) - f(i+1)) + P[≤0]·(f(0) - K) + P[≥1]·(f(1) - K)
    ///  + Σ_{i≥2} P[≥i]·(f(i) - f(i-1))`.
    ///
    /// Requires the index range to cover blocks 0 and 1.
    pub fn telescoped_sum(&self, f: impl Fn(i64) -> f64, baseline: f64) -> Result<f64> {
        let (lo, hi) = (self.first_index, self.last_index());
        if lo > 0 || hi < 1 {
            return Err(precondition("block masses must cover indices 0 and 1"));
        }
        let mut total = 0.0;
        let mut prefix = 0.0;
        for i in lo..=-1 {
            prefix += self.mass(i);
            total += prefix * (f(i) - f(i + 1));
        }
        prefix += self.mass(0);
        total += prefix * (f(0) - baseline);
        let mut suffix: f64 = (1..=hi).map(|i| self.mass(i)).sum();
        total += suffix * (f(1) - baseline);
        for i in 2..=hi {
            suffix -= self.mass(i - 1);
            total += suffix * (f(i) - f(i - 1));
        }
        Ok(total)
    }
}

/// Smallest odd `r ≥ 48·ln(1/τ)`, at least 1.
pub fn sample_budget(tau: f64) -> Result<u64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(precondition(format!("tau = {tau} not in (0, 1)")));
    }
    let raw = (MEDIAN_BUDGET_FACTOR * (1.0 / tau).ln()).ceil().max(1.0) as u64;
    Ok(if raw.is_multiple_of(2) { raw + 1 } else { raw })
}
