//! l-wise independent hash functions `[u] -> [u]` realized as random
//! polynomials of degree `l - 1` over a prime field.

use crate::error::{precondition, Error, Result};
use crate::rng::CounterRng;

/// The Mersenne prime 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Largest family `enumerate_family` will walk by default.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Prime modulus `p` and universe size `u <= p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldParams {
    p: u64,
    u: u64,
}

impl FieldParams {
    pub fn new(p: u64, u: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("modulus {p} is not prime")));
        }
        if u == 0 || u > p {
            return Err(Error::InvalidField(format!(
                "universe size {u} must lie in [1, p = {p}]"
            )));
        }
        Ok(Self { p, u })
    }

    /// `p = u = 2^61 - 1`, the production configuration.
    pub fn mersenne61() -> Self {
        Self {
            p: MERSENNE_61,
            u: MERSENNE_61,
        }
    }

    /// `u = p` for a small prime; the configuration used for exhaustive checks.
    pub fn prime(p: u64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        let prod = a as u128 * b as u128;
        if self.p == MERSENNE_61 {
            // a, b < p so prod < 2^122 and one fold plus one subtraction suffices.
            let lo = (prod as u64) & MERSENNE_61;
            let hi = (prod >> 61) as u64;
            let s = lo + hi;
            if s >= MERSENNE_61 {
                s - MERSENNE_61
            } else {
                s
            }
        } else {
            (prod % self.p as u128) as u64
        }
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a as u128 + b as u128;
        let p = self.p as u128;
        (if s >= p { s - p } else { s }) as u64
    }

    /// Maps a field value into `[0, u)` by floor scaling. Identity when `u = p`.
    #[inline]
    fn scale_to_universe(&self, v: u64) -> u64 {
        if self.u == self.p {
            v
        } else {
            ((v as u128 * self.u as u128) / self.p as u128) as u64
        }
    }
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &q in &SMALL {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    'witness: for &a in &SMALL {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `p^l`, or `None` on overflow.
pub fn family_size(p: u64, l: usize) -> Option<u64> {
    let mut size = 1u64;
    for _ in 0..l {
        size = size.checked_mul(p)?;
    }
    Some(size)
}

/// A member of the degree-`(l-1)` polynomial family.
///
/// `coeffs[j]` multiplies `x^j`. `id` is the seed the function was sampled
/// from, or its lexicographic index when produced by enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyHashFunction {
    field: FieldParams,
    coeffs: Vec<u64>,
    id: u64,
}

impl PolyHashFunction {
    /// Draws a function uniformly from the family; the coefficients are a
    /// pure function of `(seed, coefficient index)`.
    pub fn sample(field: FieldParams, l: usize, seed: u64) -> Result<Self> {
        if l == 0 {
            return Err(precondition("independence degree l must be at least 1"));
        }
        let mut rng = CounterRng::new(seed);
        let coeffs = (0..l).map(|_| rng.below(field.p)).collect();
        Ok(Self {
            field,
            coeffs,
            id: seed,
        })
    }

    pub fn from_coeffs(field: FieldParams, coeffs: Vec<u64>, id: u64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(precondition("a polynomial needs at least one coefficient"));
        }
        if let Some(&c) = coeffs.iter().find(|&&c| c >= field.p) {
            return Err(precondition(format!(
                "coefficient {c} is not a residue mod {}",
                field.p
            )));
        }
        Ok(Self { field, coeffs, id })
    }

    /// The `index`-th function in lexicographic coefficient order.
    pub fn from_index(field: FieldParams, l: usize, index: u64) -> Self {
        let mut coeffs = vec![0u64; l];
        let mut rest = index;
        for c in coeffs.iter_mut().rev() {
            *c = rest % field.p;
            rest /= field.p;
        }
        Self {
            field,
            coeffs,
            id: index,
        }
    }

    pub fn field(&self) -> FieldParams {
        self.field
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Independence degree `l` (number of coefficients).
    pub fn degree_bound(&self) -> usize {
        self.coeffs.len()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn evaluate(&self, x: u64) -> Result<u64> {
        if x >= self.field.u {
            return Err(Error::Domain {
                element: x,
                universe: self.field.u,
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Horner evaluation, highest coefficient first. The caller guarantees
    /// `x < u`.
    #[inline]
    pub fn eval_unchecked(&self, x: u64) -> u64 {
        let f = &self.field;
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = f.add(f.mul(acc, x), c);
        }
        f.scale_to_universe(acc)
    }
}

/// Lexicographic walk over every member of the family.
#[derive(Clone, Debug)]
pub struct FamilyIter {
    field: FieldParams,
    l: usize,
    next: u64,
    size: u64,
}

impl Iterator for FamilyIter {
    type Item = PolyHashFunction;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.size {
            return None;
        }
        let f = PolyHashFunction::from_index(self.field, self.l, self.next);
        self.next += 1;
        Some(f)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = (self.size - self.next) as usize;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for FamilyIter {}

pub fn enumerate_family(field: FieldParams, l: usize) -> Result<FamilyIter> {
    enumerate_family_capped(field, l, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_family_capped(field: FieldParams, l: usize, cap: u64) -> Result<FamilyIter> {
    let size = checked_family_size(field, l, cap)?;
    Ok(FamilyIter {
        field,
        l,
        next: 0,
        size,
    })
}

pub(crate) fn checked_family_size(field: FieldParams, l: usize, cap: u64) -> Result<u64> {
    if l == 0 {
        return Err(precondition("independence degree l must be at least 1"));
    }
    match family_size(field.p, l) {
        Some(size) if size <= cap => Ok(size),
        Some(size) => Err(Error::EnumerationCap {
            size: size.to_string(),
            cap,
        }),
        None => Err(Error::EnumerationCap {
            size: format!("{}^{}", field.p, l),
            cap,
        }),
    }
}

/// Exact joint distribution of `(h(x_1), ..., h(x_j))` over the whole family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointTable {
    p: u64,
    points: Vec<u64>,
    counts: Vec<u64>,
}

impl JointTable {
    pub fn points(&self) -> &[u64] {
        &self.points
    }

    /// Number of family members with `h(points[i]) = targets[i]` for all `i`.
    pub fn count(&self, targets: &[u64]) -> Option<u64> {
        if targets.len() != self.points.len() || targets.iter().any(|&t| t >= self.p) {
            return None;
        }
        let idx = targets
            .iter()
            .fold(0usize, |acc, &t| acc * self.p as usize + t as usize);
        Some(self.counts[idx])
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// The common count if every target tuple is hit equally often.
    pub fn uniform_count(&self) -> Option<u64> {
        let first = *self.counts.first()?;
        self.counts.iter().all(|&c| c == first).then_some(first)
    }
}

pub fn independence_certificate(field: FieldParams, l: usize, points: &[u64]) -> Result<JointTable> {
    if field.u != field.p {
        return Err(precondition("exact certification requires u = p"));
    }
    if points.is_empty() {
        return Err(precondition("at least one point is required"));
    }
    if points.len() > l {
        return Err(precondition(format!(
            "{} points exceed the independence degree {l}",
            points.len()
        )));
    }
    if let Some(&x) = points.iter().find(|&&x| x >= field.u) {
        return Err(Error::Domain {
            element: x,
            universe: field.u,
        });
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(precondition("certificate points must be distinct"));
    }
    let cells = checked_family_size(field, points.len(), DEFAULT_ENUMERATION_CAP)? as usize;
    let mut counts = vec![0u64; cells];
    for h in enumerate_family(field, l)? {
        let idx = points
            .iter()
            .fold(0usize, |acc, &x| acc * field.p as usize + h.eval_unchecked(x) as usize);
        counts[idx] += 1;
    }
    Ok(JointTable {
        p: field.p,
        points: points.to_vec(),
        counts,
    })
}
