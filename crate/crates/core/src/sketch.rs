//! Ranks and minima over hashed sets, the bottom-k inclusion event, and the
//! mergeable bottom-k sketch.

use std::collections::{BTreeSet, HashSet};

use crate::error::{precondition, Error, Result};
use crate::hash_family::PolyHashFunction;

/// A hash value paired with the element that produced it.
///
/// Ordered by `(value, element)`, so ranks stay well defined under hash
/// collisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HashedPoint {
    pub value: u64,
    pub element: u64,
}

impl HashedPoint {
    pub fn new(value: u64, element: u64) -> Self {
        Self { value, element }
    }

    #[inline]
    pub fn hash(h: &PolyHashFunction, element: u64) -> Self {
        Self {
            value: h.eval_unchecked(element),
            element,
        }
    }
}

fn sorted_set(points: &[HashedPoint]) -> Vec<HashedPoint> {
    let mut v = points.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// The `k`-th smallest point (1-based).
pub fn rank_k(points: &[HashedPoint], k: usize) -> Result<HashedPoint> {
    let set = sorted_set(points);
    if k == 0 || k > set.len() {
        return Err(precondition(format!("rank {k} is outside [1, {}]", set.len())));
    }
    Ok(set[k - 1])
}

/// The `k` smallest points in ascending order; all of them if fewer than `k`.
pub fn min_k(points: &[HashedPoint], k: usize) -> Vec<HashedPoint> {
    let mut set = sorted_set(points);
    set.truncate(k);
    set
}

/// Whether every point of `y` precedes the `(k-d+1)`-th smallest point of
/// `x`, i.e. whether `y` lands inside the bottom-`k` of `x ∪ y`.
pub fn dkm_event(x: &[HashedPoint], y: &[HashedPoint], d: usize, k: usize) -> Result<bool> {
    if y.len() != d {
        return Err(precondition(format!("|Y| = {} but d = {d}", y.len())));
    }
    if d == 0 || d > k {
        return Err(precondition(format!("need 1 <= d <= k, got d = {d}, k = {k}")));
    }
    let t = k - d + 1;
    if x.len() < t {
        return Err(precondition(format!(
            "|X| = {} is smaller than k - d + 1 = {t}",
            x.len()
        )));
    }
    let xs: HashSet<u64> = x.iter().map(|p| p.element).collect();
    if y.iter().any(|p| xs.contains(&p.element)) {
        return Err(precondition("X and Y must be element-disjoint"));
    }
    let y_max = y.iter().max().copied().expect("d >= 1");
    Ok(y_max < rank_k(x, t)?)
}

/// Checked bundle of the quantities `u, n, d, k, ε, c, l` and the derived
/// `t = k - d + 1`, `m = n - d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DkmwParams {
    u: u64,
    n: u64,
    d: u64,
    k: u64,
    epsilon: f64,
    c: f64,
    l: u64,
}

impl DkmwParams {
    /// Builds a parameter set with `c = 1` and `l = 3d + 2`.
    pub fn new(u: u64, n: u64, d: u64, k: u64, epsilon: f64) -> Result<Self> {
        Self {
            u,
            n,
            d,
            k,
            epsilon,
            c: 1.0,
            l: 3 * d + 2,
        }
        .validated()
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        self.c = c;
        self.validated()
    }

    pub fn with_l(mut self, l: u64) -> Result<Self> {
        self.l = l;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        let Self { u, n, d, k, .. } = self;
        // k = n is admitted: the event is then certain, which is a useful
        // degenerate case for the verifier.
        if !(2 <= d && d <= k && k <= n && n <= u) {
            return Err(precondition(format!(
                "need 2 <= d <= k <= n <= u, got d = {d}, k = {k}, n = {n}, u = {u}"
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(precondition(format!("epsilon = {} not in (0, 1)", self.epsilon)));
        }
        if !(self.c.is_finite() && self.c >= 1.0) {
            return Err(precondition(format!("series constant c = {} must be >= 1", self.c)));
        }
        if self.l == 0 {
            return Err(precondition("independence degree l must be at least 1"));
        }
        Ok(self)
    }

    pub fn u(&self) -> u64 {
        self.u
    }
    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn d(&self) -> u64 {
        self.d
    }
    pub fn k(&self) -> u64 {
        self.k
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn l(&self) -> u64 {
        self.l
    }
    pub fn t(&self) -> u64 {
        self.k - self.d + 1
    }
    pub fn m(&self) -> u64 {
        self.n - self.d
    }
}

/// What `BottomKSketch::insert` did with a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Already among the entries.
    Present,
    /// Larger than every retained entry of a full sketch.
    Rejected,
    /// Admitted, possibly pushing out the previous maximum.
    Admitted { evicted: Option<HashedPoint> },
}

/// The `k` smallest hashed points of a set under one hash function.
///
/// Equality compares `k`, the function id and the entries. `source_count` is
/// a diagnostic: the number of inserts that admitted a point not previously
/// held. It depends on insertion order and is ignored by estimators.
#[derive(Clone, Debug)]
pub struct BottomKSketch {
    k: usize,
    function_id: u64,
    entries: BTreeSet<HashedPoint>,
    source_count: u64,
}

impl PartialEq for BottomKSketch {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.function_id == other.function_id && self.entries == other.entries
    }
}

impl Eq for BottomKSketch {}

impl BottomKSketch {
    pub fn new(k: usize, function_id: u64) -> Result<Self> {
        if k == 0 {
            return Err(precondition("sketch capacity k must be at least 1"));
        }
        Ok(Self {
            k,
            function_id,
            entries: BTreeSet::new(),
            source_count: 0,
        })
    }

    /// Rebuilds a sketch from stored entries, which must be strictly
    /// increasing and at most `k` long.
    pub fn from_entries(k: usize, function_id: u64, entries: Vec<HashedPoint>) -> Result<Self> {
        let mut sketch = Self::new(k, function_id)?;
        if entries.len() > k {
            return Err(precondition(format!("{} entries exceed k = {k}", entries.len())));
        }
        if entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(precondition("entries are not strictly increasing"));
        }
        sketch.source_count = entries.len() as u64;
        sketch.entries = entries.into_iter().collect();
        Ok(sketch)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn function_id(&self) -> u64 {
        self.function_id
    }

    pub fn source_count(&self) -> u64 {
        self.source_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.k
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &HashedPoint> + DoubleEndedIterator {
        self.entries.iter()
    }

    pub fn contains(&self, point: &HashedPoint) -> bool {
        self.entries.contains(point)
    }

    /// Largest retained point once the sketch is full.
    pub fn threshold(&self) -> Option<&HashedPoint> {
        if self.is_full() {
            self.entries.last()
        } else {
            None
        }
    }

    pub fn insert(&mut self, element: u64, h: &PolyHashFunction) -> Result<InsertOutcome> {
        if h.id() != self.function_id {
            return Err(Error::Config(format!(
                "hash function {} does not match sketch function {}",
                h.id(),
                self.function_id
            )));
        }
        let value = h.evaluate(element)?;
        Ok(self.insert_point(HashedPoint::new(value, element)))
    }

    /// Inserts an already hashed point. The caller is responsible for the
    /// point having been produced by this sketch's function.
    pub fn insert_point(&mut self, point: HashedPoint) -> InsertOutcome {
        if let Some(max) = self.threshold() {
            if point > *max {
                return InsertOutcome::Rejected;
            }
        }
        if !self.entries.insert(point) {
            return InsertOutcome::Present;
        }
        self.source_count += 1;
        let evicted = if self.entries.len() > self.k {
            self.entries.pop_last()
        } else {
            None
        };
        InsertOutcome::Admitted { evicted }
    }

    /// Sketch of the union of the two source sets.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::Config(format!(
                "cannot merge sketches with k = {} and k = {}",
                self.k, other.k
            )));
        }
        if self.function_id != other.function_id {
            return Err(Error::Config(format!(
                "cannot merge sketches of functions {} and {}",
                self.function_id, other.function_id
            )));
        }
        let entries = self.entries.union(&other.entries).take(self.k).copied().collect();
        Ok(Self {
            k: self.k,
            function_id: self.function_id,
            entries,
            source_count: self.source_count.max(other.source_count),
        })
    }
}
