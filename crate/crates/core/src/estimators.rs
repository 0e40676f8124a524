//! Replacing many min-wise functions by a few bottom-k functions: each
//! sketch yields `k` pairwise independent samples (a Chebyshev-quality
//! estimate), and the median across `r` sketches amplifies the success
//! probability to `1 - τ`.

use std::collections::HashMap;

use crate::analysis::{required_independence, sample_budget};
use crate::error::{precondition, Error, Result};
use crate::exec::{map_collect, Execution};
use crate::hash_family::{FieldParams, PolyHashFunction, MERSENNE_61};
use crate::rng::{derive_seed, mix64};
use crate::sketch::{BottomKSketch, HashedPoint, InsertOutcome};

pub const DEFAULT_SHINGLE_WIDTH: usize = 8;
pub const DEFAULT_K: usize = 512;
pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_D: u64 = 2;

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// Fingerprint of one shingle: FNV-1a over the bytes from an offset basis
/// keyed by `seed`, finalized with `mix64`, then folded into `[0, 2^61 - 1)`.
pub fn fingerprint(window: &[u8], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ mix64(seed);
    for &b in window {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    (mix64(h) >> 3) % MERSENNE_61
}

/// Distinct fingerprints of all `w`-byte windows, sorted.
pub fn shingle_ingest(bytes: &[u8], w: usize, seed: u64) -> Result<Vec<u64>> {
    if w == 0 {
        return Err(precondition("shingle width must be at least 1"));
    }
    let mut out: Vec<u64> = bytes.windows(w).map(|win| fingerprint(win, seed)).collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Shape shared by every sketch of a bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchParams {
    pub field: FieldParams,
    /// Independence degree of the hash polynomials.
    pub l: usize,
    pub k: usize,
    /// Size of the subsets whose joint sampling is guaranteed.
    pub d: u64,
}

impl SketchParams {
    /// Polynomials of degree `3d + 1` over `2^61 - 1`.
    pub fn for_d(k: usize, d: u64) -> Result<Self> {
        let levels = required_independence(d)?;
        Ok(Self {
            field: FieldParams::mersenne61(),
            l: levels.theorem_l as usize,
            k,
            d,
        })
    }
}

impl Default for SketchParams {
    fn default() -> Self {
        Self::for_d(DEFAULT_K, DEFAULT_D).expect("defaults are valid")
    }
}

/// `r` bottom-k sketches of one set under functions seeded by
/// `derive_seed(master_seed, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchBundle {
    params: SketchParams,
    tau: Option<f64>,
    functions: Vec<PolyHashFunction>,
    sketches: Vec<BottomKSketch>,
    /// Per sketch, occurrences of each retained element.
    multiplicities: Option<Vec<HashMap<u64, u64>>>,
}

impl SketchBundle {
    /// An empty bundle of `r` sketches.
    pub fn new(params: SketchParams, r: usize, master_seed: u64, track_multiplicity: bool) -> Result<Self> {
        if r == 0 {
            return Err(precondition("a bundle needs at least one sketch"));
        }
        let functions = (0..r as u64)
            .map(|j| PolyHashFunction::sample(params.field, params.l, derive_seed(master_seed, j)))
            .collect::<Result<Vec<_>>>()?;
        let sketches = functions
            .iter()
            .map(|h| BottomKSketch::new(params.k, h.id()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            tau: None,
            functions,
            sketches,
            multiplicities: track_multiplicity.then(|| vec![HashMap::new(); r]),
        })
    }

    pub(crate) fn from_parts(
        params: SketchParams,
        functions: Vec<PolyHashFunction>,
        sketches: Vec<BottomKSketch>,
    ) -> Self {
        Self {
            params,
            tau: None,
            functions,
            sketches,
            multiplicities: None,
        }
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn r(&self) -> usize {
        self.sketches.len()
    }

    pub fn sketches(&self) -> &[BottomKSketch] {
        &self.sketches
    }

    pub fn functions(&self) -> &[PolyHashFunction] {
        &self.functions
    }

    pub fn tracks_multiplicity(&self) -> bool {
        self.multiplicities.is_some()
    }

    /// True when some sketch holds fewer than `k` entries, i.e. the source
    /// set is smaller than `k`.
    pub fn is_underfull(&self) -> bool {
        self.sketches.iter().any(|s| !s.is_full())
    }

    pub fn insert(&mut self, element: u64) -> Result<()> {
        let u = self.params.field.u();
        if element >= u {
            return Err(Error::Domain { element, universe: u });
        }
        for j in 0..self.sketches.len() {
            let point = HashedPoint::hash(&self.functions[j], element);
            let outcome = self.sketches[j].insert_point(point);
            if let Some(counts) = self.multiplicities.as_mut() {
                record(&mut counts[j], outcome, element);
            }
        }
        Ok(())
    }

    /// Sketch-by-sketch union.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let sketches = self
            .sketches
            .iter()
            .zip(&other.sketches)
            .map(|(a, b)| a.merge(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: self.params,
            tau: self.tau,
            functions: self.functions.clone(),
            sketches,
            multiplicities: None,
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.params != other.params {
            return Err(Error::Config(format!(
                "sketch parameters differ: {:?} vs {:?}",
                self.params, other.params
            )));
        }
        if self.r() != other.r() {
            return Err(Error::Config(format!(
                "bundle sizes differ: {} vs {}",
                self.r(),
                other.r()
            )));
        }
        if self.functions != other.functions {
            return Err(Error::Config("bundles use different hash function seeds".into()));
        }
        Ok(())
    }
}

/// Multiplicity bookkeeping. An element in the final bottom-k was admitted on
/// its first occurrence and never evicted, so its count is exact.
fn record(counts: &mut HashMap<u64, u64>, outcome: InsertOutcome, element: u64) {
    match outcome {
        InsertOutcome::Admitted { evicted } => {
            counts.insert(element, 1);
            if let Some(gone) = evicted {
                counts.remove(&gone.element);
            }
        }
        InsertOutcome::Present => *counts.entry(element).or_insert(0) += 1,
        InsertOutcome::Rejected => {}
    }
}

/// Builds a bundle of `sample_budget(tau)` sketches.
pub fn build_bundle(elements: &[u64], params: SketchParams, tau: f64, master_seed: u64) -> Result<SketchBundle> {
    let r = sample_budget(tau)? as usize;
    let mut bundle = build_bundle_with_count(elements, params, r, master_seed, Execution::default())?;
    bundle.tau = Some(tau);
    Ok(bundle)
}

/// Builds a bundle of exactly `r` sketches, one worker per sketch.
pub fn build_bundle_with_count(
    elements: &[u64],
    params: SketchParams,
    r: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<SketchBundle> {
    build(elements, params, r, master_seed, exec, false)
}

/// Like [`build_bundle_with_count`] but over a stream with repeats, keeping
/// per-entry occurrence counts for [`rarity_estimate`].
pub fn build_counting_bundle(
    stream: &[u64],
    params: SketchParams,
    r: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<SketchBundle> {
    build(stream, params, r, master_seed, exec, true)
}

fn build(
    elements: &[u64],
    params: SketchParams,
    r: usize,
    master_seed: u64,
    exec: Execution,
    track: bool,
) -> Result<SketchBundle> {
    let u = params.field.u();
    if let Some(&bad) = elements.iter().find(|&&e| e >= u) {
        return Err(Error::Domain {
            element: bad,
            universe: u,
        });
    }
    let mut bundle = SketchBundle::new(params, r, master_seed, track)?;
    let built = map_collect(exec, 0..r as u64, |j| {
        let j = j as usize;
        let h = &bundle.functions[j];
        let mut sketch = bundle.sketches[j].clone();
        let mut counts = HashMap::new();
        for &e in elements {
            let outcome = sketch.insert_point(HashedPoint::hash(h, e));
            if track {
                record(&mut counts, outcome, e);
            }
        }
        (sketch, counts)
    });
    let (sketches, counts): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    bundle.sketches = sketches;
    if track {
        bundle.multiplicities = Some(counts);
    }
    Ok(bundle)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JaccardEstimate {
    /// Median of the per-sketch estimates.
    pub estimate: f64,
    pub per_sketch: Vec<f64>,
    /// Some sketch saw fewer than `k` elements; those sketches compare the
    /// full sets and are exact.
    pub underfull: bool,
}

/// Per sketch: the share of the union's bottom-k present in both sides.
pub fn jaccard_estimate(a: &SketchBundle, b: &SketchBundle) -> Result<JaccardEstimate> {
    a.check_compatible(b)?;
    let per_sketch = a
        .sketches
        .iter()
        .zip(&b.sketches)
        .map(|(sa, sb)| {
            let union = sa.merge(sb)?;
            if union.is_empty() {
                return Ok(1.0);
            }
            let shared = union.entries().filter(|p| sa.contains(p) && sb.contains(p)).count();
            Ok(shared as f64 / union.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(JaccardEstimate {
        estimate: median(&per_sketch),
        per_sketch,
        underfull: a.is_underfull() || b.is_underfull(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RarityEstimate {
    pub estimate: f64,
    pub per_sketch: Vec<f64>,
}

/// Fraction of distinct elements occurring exactly once.
pub fn rarity_estimate(bundle: &SketchBundle) -> Result<RarityEstimate> {
    rarity_estimate_with(bundle, |count| count == 1)
}

/// Fraction of distinct elements whose occurrence count satisfies `rare`.
pub fn rarity_estimate_with(bundle: &SketchBundle, rare: impl Fn(u64) -> bool) -> Result<RarityEstimate> {
    let counts = bundle
        .multiplicities
        .as_ref()
        .ok_or_else(|| Error::State("bundle was not built with multiplicity tracking".into()))?;
    let per_sketch: Vec<f64> = bundle
        .sketches
        .iter()
        .zip(counts)
        .map(|(sketch, counts)| {
            if sketch.is_empty() {
                return 0.0;
            }
            let hits = sketch
                .entries()
                .filter(|p| rare(counts.get(&p.element).copied().unwrap_or(0)))
                .count();
            hits as f64 / sketch.len() as f64
        })
        .collect();
    Ok(RarityEstimate {
        estimate: median(&per_sketch),
        per_sketch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::min_k;

    #[test]
    fn shingle_examples() {
        assert!(shingle_ingest(b"ab", 3, 0).unwrap().is_empty());
        assert!(shingle_ingest(b"", 3, 0).unwrap().is_empty());
        let s = shingle_ingest(b"abcab", 3, 0).unwrap();
        assert!(!s.is_empty() && s.len() <= 3);
        assert_eq!(s, shingle_ingest(b"abcab", 3, 0).unwrap());
        // "abcabc" has windows abc, bca, cab, abc.
        assert_eq!(shingle_ingest(b"abcabc", 3, 0).unwrap().len(), 3);
        assert!(shingle_ingest(b"abc", 0, 0).is_err());
        assert!(s.iter().all(|&x| x < MERSENNE_61));
    }

    fn params(k: usize) -> SketchParams {
        SketchParams::for_d(k, 2).unwrap()
    }

    #[test]
    fn bundle_is_deterministic_and_matches_min_k() {
        let elems: Vec<u64> = (0..500).map(|i| i * 7919).collect();
        let a = build_bundle_with_count(&elems, params(32), 5, 1, Execution::Parallel).unwrap();
        let b = build_bundle_with_count(&elems, params(32), 5, 1, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        for (h, s) in a.functions().iter().zip(a.sketches()) {
            let pts: Vec<HashedPoint> = elems.iter().map(|&e| HashedPoint::hash(h, e)).collect();
            assert_eq!(s.entries().copied().collect::<Vec<_>>(), min_k(&pts, 32));
        }
        let ids: std::collections::HashSet<u64> = a.functions().iter().map(|h| h.id()).collect();
        assert_eq!(ids.len(), 5);
    }

    #[test]
    fn bundle_size_follows_budget() {
        let b = build_bundle(&[1, 2, 3], params(8), 0.05, 0).unwrap();
        assert_eq!(b.r(), 145);
        assert_eq!(b.tau(), Some(0.05));
    }

    #[test]
    fn underfull_bundle_holds_everything() {
        let b = build_bundle_with_count(&[5, 6, 7], params(8), 3, 0, Execution::default()).unwrap();
        assert!(b.is_underfull());
        assert!(b.sketches().iter().all(|s| s.len() == 3));
    }

    #[test]
    fn streaming_insert_equals_batch() {
        let elems: Vec<u64> = (0..300).map(|i| i * 31 + 4).collect();
        let batch = build_bundle_with_count(&elems, params(16), 3, 9, Execution::default()).unwrap();
        let mut streamed = SketchBundle::new(params(16), 3, 9, false).unwrap();
        for &e in &elems {
            streamed.insert(e).unwrap();
        }
        assert_eq!(streamed.sketches(), batch.sketches());
        assert!(streamed.insert(MERSENNE_61).is_err());
    }

    #[test]
    fn union_bundle_equals_merge() {
        let a: Vec<u64> = (0..400).collect();
        let b: Vec<u64> = (200..700).collect();
        let union: Vec<u64> = (0..700).collect();
        let build = |s: &[u64]| build_bundle_with_count(s, params(32), 4, 3, Execution::default()).unwrap();
        assert_eq!(
            build(&a).merge(&build(&b)).unwrap().sketches(),
            build(&union).sketches()
        );
    }

    #[test]
    fn jaccard_identical_and_disjoint() {
        let a: Vec<u64> = (0..2000).collect();
        let b: Vec<u64> = (10_000..12_000).collect();
        let ba = build_bundle_with_count(&a, params(64), 5, 1, Execution::default()).unwrap();
        let bb = build_bundle_with_count(&b, params(64), 5, 1, Execution::default()).unwrap();
        assert_eq!(jaccard_estimate(&ba, &ba).unwrap().estimate, 1.0);
        let disjoint = jaccard_estimate(&ba, &bb).unwrap();
        assert_eq!(disjoint.estimate, 0.0);
        assert!(!disjoint.underfull);
        let other_seed = build_bundle_with_count(&a, params(64), 5, 2, Execution::default()).unwrap();
        assert!(matches!(jaccard_estimate(&ba, &other_seed), Err(Error::Config(_))));
    }

    #[test]
    fn underfull_jaccard_is_exact() {
        let a: Vec<u64> = (0..30).collect();
        let b: Vec<u64> = (20..40).collect();
        let ba = build_bundle_with_count(&a, params(64), 3, 1, Execution::default()).unwrap();
        let bb = build_bundle_with_count(&b, params(64), 3, 1, Execution::default()).unwrap();
        let est = jaccard_estimate(&ba, &bb).unwrap();
        assert!(est.underfull);
        assert_eq!(est.estimate, 10.0 / 40.0);
    }

    #[test]
    fn rarity_extremes_and_state_error() {
        let distinct: Vec<u64> = (0..1000).collect();
        let twice: Vec<u64> = distinct.iter().chain(&distinct).copied().collect();
        let p = params(64);
        let all_rare = build_counting_bundle(&distinct, p, 3, 0, Execution::default()).unwrap();
        assert_eq!(rarity_estimate(&all_rare).unwrap().estimate, 1.0);
        let none_rare = build_counting_bundle(&twice, p, 3, 0, Execution::default()).unwrap();
        assert_eq!(rarity_estimate(&none_rare).unwrap().estimate, 0.0);
        let plain = build_bundle_with_count(&distinct, p, 3, 0, Execution::default()).unwrap();
        assert!(matches!(rarity_estimate(&plain), Err(Error::State(_))));
    }

    #[test]
    fn counting_bundle_counts_are_exact() {
        let stream: Vec<u64> = (0..3000u64).map(|i| (i * i) % 701).collect();
        let bundle = build_counting_bundle(&stream, params(16), 2, 5, Execution::default()).unwrap();
        let counts = bundle.multiplicities.as_ref().unwrap();
        for (sketch, counts) in bundle.sketches().iter().zip(counts) {
            assert_eq!(counts.len(), sketch.len());
            for p in sketch.entries() {
                let truth = stream.iter().filter(|&&e| e == p.element).count() as u64;
                assert_eq!(counts[&p.element], truth);
            }
        }
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
