//! Empirical certification of the bounded quantities: the inclusion event
//! probability against its exact value, the distribution of `RANK_t` over
//! blocks, and the `l`-th central moment of block counts.
//!
//! Every trial draws its randomness from `derive_seed(master_seed, trial)`
//! and trials are aggregated with integer counters, so a result depends only
//! on the configuration, never on thread scheduling.

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::analysis::{exact_probability, moment_bound, tail_bound_rhs, BlockPartition, ExactProbability};
use crate::error::{precondition, Error, Result};
use crate::exec::{count_hits, fold_reduce, Execution};
use crate::hash_family::{checked_family_size, FieldParams, PolyHashFunction, DEFAULT_ENUMERATION_CAP};
use crate::rng::{derive_seed, CounterRng};
use crate::sketch::{DkmwParams, HashedPoint};

/// z-score of a two-sided 95% normal interval.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every member of the family, once.
    Exhaustive,
    /// `trials` functions drawn with counter-derived seeds.
    MonteCarlo,
    /// A fresh uniform value per element per trial.
    TrulyRandomOracle,
}

/// Where trial hash functions come from.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionSource {
    /// The degree-`(l-1)` polynomial family over `field`.
    Polynomial { field: FieldParams, l: usize },
    /// A single fixed function; a family of size one.
    Fixed(PolyHashFunction),
}

impl FunctionSource {
    pub fn polynomial(field: FieldParams, l: usize) -> Self {
        FunctionSource::Polynomial { field, l }
    }

    pub fn field(&self) -> FieldParams {
        match self {
            FunctionSource::Polynomial { field, .. } => *field,
            FunctionSource::Fixed(h) => h.field(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub params: DkmwParams,
    pub trials: u64,
    pub master_seed: u64,
    pub family: FunctionSource,
    pub mode: Mode,
    pub execution: Execution,
    pub enumeration_cap: u64,
}

impl TrialConfig {
    pub fn new(params: DkmwParams, family: FunctionSource, mode: Mode, trials: u64, master_seed: u64) -> Self {
        Self {
            params,
            trials,
            master_seed,
            family,
            mode,
            execution: Execution::default(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    fn universe(&self) -> u64 {
        self.family.field().u()
    }

    /// Trial index range, checking universe agreement and the enumeration cap.
    fn trial_range(&self) -> Result<Range<u64>> {
        if self.params.u() != self.universe() {
            return Err(Error::Config(format!(
                "params universe {} differs from family universe {}",
                self.params.u(),
                self.universe()
            )));
        }
        let count = match (self.mode, &self.family) {
            (Mode::Exhaustive, FunctionSource::Polynomial { field, l }) => {
                checked_family_size(*field, *l, self.enumeration_cap)?
            }
            (Mode::Exhaustive, FunctionSource::Fixed(_)) => 1,
            _ => self.trials,
        };
        if count == 0 {
            return Err(precondition("at least one trial is required"));
        }
        Ok(0..count)
    }

    fn trial_hash(&self, trial: u64) -> TrialHash {
        match (self.mode, &self.family) {
            (Mode::TrulyRandomOracle, _) => {
                TrialHash::Oracle(CounterRng::new(derive_seed(self.master_seed, trial)), self.universe())
            }
            (_, FunctionSource::Fixed(h)) => TrialHash::Poly(h.clone()),
            (Mode::Exhaustive, FunctionSource::Polynomial { field, l }) => {
                TrialHash::Poly(PolyHashFunction::from_index(*field, *l, trial))
            }
            (Mode::MonteCarlo, FunctionSource::Polynomial { field, l }) => TrialHash::Poly(
                PolyHashFunction::sample(*field, *l, derive_seed(self.master_seed, trial))
                    .expect("l validated at family construction"),
            ),
        }
    }
}

/// The hash used within one trial. Oracle draws are consumed in the order
/// elements are hashed, so callers must hash in a fixed order.
enum TrialHash {
    Poly(PolyHashFunction),
    Oracle(CounterRng, u64),
}

impl TrialHash {
    #[inline]
    fn point(&mut self, element: u64) -> HashedPoint {
        let value = match self {
            TrialHash::Poly(h) => h.eval_unchecked(element),
            TrialHash::Oracle(rng, u) => rng.below(*u),
        };
        HashedPoint::new(value, element)
    }
}

/// Whether all of `ys` lands in the bottom `k` of `xs ∪ ys`: at most `k - d`
/// points of `xs` may precede the largest point of `ys`.
fn inclusion_event(hash: &mut TrialHash, xs: &[u64], ys: &[u64], k: u64) -> bool {
    let y_max = ys.iter().map(|&y| hash.point(y)).max().expect("d >= 1");
    let allowed = k - ys.len() as u64;
    let mut below = 0u64;
    for &x in xs {
        if hash.point(x) < y_max {
            below += 1;
            if below > allowed {
                return false;
            }
        }
    }
    true
}

fn check_elements(universe: u64, sets: &[&[u64]]) -> Result<()> {
    let mut seen = HashSet::new();
    for &x in sets.iter().flat_map(|s| s.iter()) {
        if x >= universe {
            return Err(Error::Domain { element: x, universe });
        }
        if !seen.insert(x) {
            return Err(precondition(format!("element {x} appears twice across X and Y")));
        }
    }
    Ok(())
}

/// Empirical inclusion probability next to its exact value.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaEstimate {
    pub empirical_probability: f64,
    pub exact: ExactProbability,
    pub relative_deviation: f64,
    /// Half-width of a 95% interval; zero for exhaustive results.
    pub ci_halfwidth: f64,
    pub successes: u64,
    pub trials: u64,
    /// The exact family frequency, in exhaustive mode.
    pub exact_frequency: Option<BigRational>,
}

impl DeltaEstimate {
    pub fn standard_error(&self) -> f64 {
        if self.exact_frequency.is_some() {
            return 0.0;
        }
        binomial_se(self.empirical_probability, self.trials)
    }
}

fn binomial_se(f: f64, trials: u64) -> f64 {
    (f * (1.0 - f) / trials as f64).sqrt()
}

/// Normal-approximation half-width; at 0 or 1 successes-frequency, the
/// exact one-sided Clopper-Pearson width `1 - 0.025^(1/T)` instead.
pub fn ci_halfwidth(successes: u64, trials: u64) -> f64 {
    if successes == 0 || successes == trials {
        1.0 - 0.025f64.powf(1.0 / trials as f64)
    } else {
        Z_95 * binomial_se(successes as f64 / trials as f64, trials)
    }
}

pub fn estimate_event_probability(cfg: &TrialConfig, xs: &[u64], ys: &[u64]) -> Result<DeltaEstimate> {
    let p = &cfg.params;
    if ys.len() as u64 != p.d() {
        return Err(precondition(format!("|Y| = {} but d = {}", ys.len(), p.d())));
    }
    if xs.len() as u64 != p.m() {
        return Err(precondition(format!("|X| = {} but n - d = {}", xs.len(), p.m())));
    }
    check_elements(cfg.universe(), &[xs, ys])?;
    let range = cfg.trial_range()?;
    let trials = range.end;
    let k = p.k();
    let successes = count_hits(
        cfg.execution,
        range,
        || (),
        |_, i| inclusion_event(&mut cfg.trial_hash(i), xs, ys, k),
    );
    let exact = exact_probability(p.n(), p.k(), p.d())?;
    let empirical = successes as f64 / trials as f64;
    let exhaustive = cfg.mode == Mode::Exhaustive;
    Ok(DeltaEstimate {
        empirical_probability: empirical,
        relative_deviation: (empirical - exact.real_value()).abs() / exact.real_value(),
        exact,
        ci_halfwidth: if exhaustive {
            0.0
        } else {
            ci_halfwidth(successes, trials)
        },
        successes,
        trials,
        exact_frequency: exhaustive.then(|| BigRational::new(BigInt::from(successes), BigInt::from(trials))),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundViolation {
    pub index: i64,
    pub empirical: f64,
    pub bound: f64,
}

/// Distribution of the block holding `RANK_t` of `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailHistogram {
    pub counts: BTreeMap<i64, u64>,
    pub trials: u64,
    pub bound_violations: Vec<BoundViolation>,
}

impl TailHistogram {
    pub fn frequency(&self, index: i64) -> f64 {
        self.counts.get(&index).copied().unwrap_or(0) as f64 / self.trials as f64
    }

    pub fn standard_error(&self, index: i64) -> f64 {
        binomial_se(self.frequency(index), self.trials)
    }
}

fn merge_counts<K: Ord>(mut a: BTreeMap<K, u64>, b: BTreeMap<K, u64>) -> BTreeMap<K, u64> {
    for (key, c) in b {
        *a.entry(key).or_insert(0) += c;
    }
    a
}

pub fn tail_histogram(cfg: &TrialConfig, xs: &[u64]) -> Result<TailHistogram> {
    let p = &cfg.params;
    if xs.len() as u64 != p.m() {
        return Err(precondition(format!("|X| = {} but n - d = {}", xs.len(), p.m())));
    }
    if p.m() < p.t() {
        return Err(precondition(format!("|X| = {} is smaller than t = {}", p.m(), p.t())));
    }
    check_elements(cfg.universe(), &[xs])?;
    let range = cfg.trial_range()?;
    let trials = range.end;
    let partition = BlockPartition::new(p);
    let rank = (p.t() - 1) as usize;
    let counts = fold_reduce(
        cfg.execution,
        range,
        || Vec::with_capacity(xs.len()),
        BTreeMap::new,
        |mut acc: BTreeMap<i64, u64>, buf: &mut Vec<HashedPoint>, i| {
            let mut hash = cfg.trial_hash(i);
            buf.clear();
            buf.extend(xs.iter().map(|&x| hash.point(x)));
            let (_, rank_t, _) = buf.select_nth_unstable(rank);
            *acc.entry(partition.block_of(rank_t.value)).or_insert(0) += 1;
            acc
        },
        merge_counts,
    );
    let bound_violations = counts
        .iter()
        .filter_map(|(&index, &c)| {
            let f = c as f64 / trials as f64;
            let bound = tail_bound_rhs(index.unsigned_abs(), p.d());
            (f > bound + 3.0 * binomial_se(f, trials)).then_some(BoundViolation {
                index,
                empirical: f,
                bound,
            })
        })
        .collect();
    Ok(TailHistogram {
        counts,
        trials,
        bound_violations,
    })
}

/// `E|Z - E_i|^l` over trials beside its closed-form bound.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentCheck {
    pub empirical_moment: f64,
    pub bound: f64,
    /// `E_i = t(1 + εi)`.
    pub expected: f64,
    pub order: u64,
    /// Hash values strictly below this count toward `Z`.
    pub cutoff: u64,
    /// Trials per observed value of `Z`.
    pub z_counts: BTreeMap<u64, u64>,
}

/// `Z` counts the elements of `X` hashing below `(1 + εi)·t·u/m`; the moment
/// order is `cfg.params.l()`.
pub fn moment_check(cfg: &TrialConfig, block_index: i64, xs: &[u64]) -> Result<MomentCheck> {
    let p = &cfg.params;
    let order = p.l();
    if xs.len() as u64 != p.m() {
        return Err(precondition(format!("|X| = {} but n - d = {}", xs.len(), p.m())));
    }
    check_elements(cfg.universe(), &[xs])?;
    let partition = BlockPartition::new(p);
    let boundary = partition.edge(block_index);
    if !(boundary > 0.0 && boundary <= p.u() as f64) {
        return Err(precondition(format!(
            "block {block_index} boundary {boundary} lies outside (0, u]"
        )));
    }
    let expected = p.t() as f64 * (1.0 + p.epsilon() * block_index as f64);
    let bound = moment_bound(order, expected)?;
    let range = cfg.trial_range()?;
    let trials = range.end;
    let cutoff = boundary.ceil() as u64;
    let z_counts = fold_reduce(
        cfg.execution,
        range,
        || (),
        BTreeMap::new,
        |mut acc: BTreeMap<u64, u64>, _, i| {
            let mut hash = cfg.trial_hash(i);
            let z = xs.iter().filter(|&&x| hash.point(x).value < cutoff).count() as u64;
            *acc.entry(z).or_insert(0) += 1;
            acc
        },
        merge_counts,
    );
    let empirical_moment = z_counts
        .iter()
        .map(|(&z, &c)| c as f64 * (z as f64 - expected).abs().powi(order as i32))
        .sum::<f64>()
        / trials as f64;
    Ok(MomentCheck {
        empirical_moment,
        bound,
        expected,
        order,
        cutoff,
        z_counts,
    })
}

/// How `delta_scan` draws its `(X, Y)` pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SetGenerator {
    /// `n` distinct uniform elements of `[0, u)`.
    #[default]
    Uniform,
    /// A run of `n` consecutive elements at a uniform offset, with `Y` at
    /// uniformly chosen positions inside the run.
    Clustered,
}

/// Draws disjoint `(X, Y)` with `|X| = n - d`, `|Y| = d`.
pub fn draw_sets(generator: SetGenerator, u: u64, n: u64, d: u64, seed: u64) -> Result<(Vec<u64>, Vec<u64>)> {
    if n > u || d > n {
        return Err(precondition(format!(
            "cannot draw n = {n}, d = {d} from a universe of {u}"
        )));
    }
    let mut rng = CounterRng::new(seed);
    let mut all: Vec<u64> = match generator {
        SetGenerator::Uniform => {
            let mut seen = HashSet::with_capacity(n as usize);
            let mut out = Vec::with_capacity(n as usize);
            while (out.len() as u64) < n {
                let x = rng.below(u);
                if seen.insert(x) {
                    out.push(x);
                }
            }
            out
        }
        SetGenerator::Clustered => {
            let start = rng.below(u - n + 1);
            let mut run: Vec<u64> = (start..start + n).collect();
            // Partial Fisher-Yates: the first d slots become Y.
            for j in 0..d as usize {
                let pick = j + rng.below(n - j as u64) as usize;
                run.swap(j, pick);
            }
            run
        }
    };
    let xs = all.split_off(d as usize);
    Ok((xs, all))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairReport {
    pub index: u64,
    /// Seed passed to [`draw_sets`].
    pub set_seed: u64,
    /// `master_seed` of the per-pair trial run.
    pub trial_seed: u64,
    pub estimate: DeltaEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaScan {
    pub pairs: Vec<PairReport>,
    pub worst_index: usize,
}

impl DeltaScan {
    pub fn worst(&self) -> &PairReport {
        &self.pairs[self.worst_index]
    }

    pub fn worst_deviation(&self) -> f64 {
        self.worst().estimate.relative_deviation
    }
}

/// Runs [`estimate_event_probability`] over `set_count` random pairs and
/// reports the largest relative deviation. Pair `j` uses set seed
/// `derive_seed(master, 2j)` and trial seed `derive_seed(master, 2j + 1)`.
pub fn delta_scan(cfg: &TrialConfig, set_count: u64, generator: SetGenerator) -> Result<DeltaScan> {
    if set_count == 0 {
        return Err(precondition("set_count must be at least 1"));
    }
    let p = &cfg.params;
    let mut pairs = Vec::with_capacity(set_count as usize);
    for index in 0..set_count {
        let set_seed = derive_seed(cfg.master_seed, 2 * index);
        let trial_seed = derive_seed(cfg.master_seed, 2 * index + 1);
        let (xs, ys) = draw_sets(generator, p.u(), p.n(), p.d(), set_seed)?;
        let estimate = estimate_event_probability(&cfg.clone().with_seed(trial_seed), &xs, &ys)?;
        pairs.push(PairReport {
            index,
            set_seed,
            trial_seed,
            estimate,
        });
    }
    let worst_index = pairs
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.estimate
                .relative_deviation
                .total_cmp(&b.1.estimate.relative_deviation)
        })
        .map(|(i, _)| i)
        .expect("set_count >= 1");
    Ok(DeltaScan { pairs, worst_index })
}
