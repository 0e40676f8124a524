//! Canned verification runs behind `dkmw verify`, with a line-oriented
//! report: `check=<name> value=<float> bound=<float> status=<pass|fail>`.

use std::fmt;

use crate::analysis::{exact_probability, required_k};
use crate::error::Result;
use crate::hash_family::{independence_certificate, FieldParams, MERSENNE_61};
use crate::sketch::DkmwParams;
use crate::verifier::{
    delta_scan, draw_sets, estimate_event_probability, moment_check, tail_histogram, FunctionSource, Mode,
    SetGenerator, TrialConfig,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} value={} bound={} status={}",
            self.name,
            self.value,
            self.bound,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, check: Check) {
        self.checks.push(check);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Tails,
    Moments,
    Delta,
    Independence,
}

impl Suite {
    pub fn default_trials(self) -> u64 {
        match self {
            Suite::Lemma1 => 1_000_000,
            Suite::Tails | Suite::Moments => 10_000,
            Suite::Delta => 100_000,
            Suite::Independence => 0,
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, trials: Option<u64>) -> Result<Report> {
    let trials = trials.unwrap_or(suite.default_trials());
    match suite {
        Suite::Lemma1 => lemma1(seed, trials),
        Suite::Tails => tails(seed, trials),
        Suite::Moments => moments(seed, trials),
        Suite::Delta => delta(seed, trials),
        Suite::Independence => independence(),
    }
}

fn mersenne_cfg(params: DkmwParams, l: usize, mode: Mode, trials: u64, seed: u64) -> TrialConfig {
    TrialConfig::new(
        params,
        FunctionSource::polynomial(FieldParams::mersenne61(), l),
        mode,
        trials,
        seed,
    )
}

/// Truly random baseline at n = 10, d = 2, k = 4 against 2/15.
fn lemma1(seed: u64, trials: u64) -> Result<Report> {
    let params = DkmwParams::new(MERSENNE_61, 10, 2, 4, 0.5)?;
    let cfg = mersenne_cfg(params, 8, Mode::TrulyRandomOracle, trials, seed);
    let (xs, ys) = draw_sets(SetGenerator::Uniform, MERSENNE_61, 10, 2, seed)?;
    let est = estimate_event_probability(&cfg, &xs, &ys)?;
    let exact = exact_probability(10, 4, 2)?.real_value();
    let mut report = Report::default();
    report.push(Check::at_most(
        "lemma1_abs_error",
        (est.empirical_probability - exact).abs(),
        0.002,
    ));
    Ok(report)
}

/// `Pr[RANK_t ∈ b_i] <= 1/|i|^3 + 3 SE` for `|i|` in 2..=5 at the k the tail
/// lemma asks for with ε = 0.9, l = 8.
fn tails(seed: u64, trials: u64) -> Result<Report> {
    let d = 2;
    let k = required_k(d, 0.9, 1.0, 8)?;
    let params = DkmwParams::new(MERSENNE_61, 10 * k, d, k, 0.9)?;
    let cfg = mersenne_cfg(params, 8, Mode::MonteCarlo, trials, seed);
    let (xs, _) = draw_sets(SetGenerator::Uniform, MERSENNE_61, params.n(), d, seed)?;
    let hist = tail_histogram(&cfg, &xs)?;
    let mut report = Report::default();
    for i in [-5i64, -4, -3, -2, 2, 3, 4, 5] {
        let bound = crate::analysis::tail_bound_rhs(i.unsigned_abs(), d) + 3.0 * hist.standard_error(i);
        report.push(Check::at_most(format!("tail_block_{i}"), hist.frequency(i), bound));
    }
    report.push(Check::at_most(
        "tail_violations",
        hist.bound_violations.len() as f64,
        0.0,
    ));
    Ok(report)
}

/// Fourth central moment of the block-1 count at n = 200 against the
/// closed-form bound, with a factor-10 margin.
fn moments(seed: u64, trials: u64) -> Result<Report> {
    let params = DkmwParams::new(MERSENNE_61, 200, 2, 50, 0.9)?.with_l(4)?;
    let cfg = mersenne_cfg(params, 4, Mode::MonteCarlo, trials, seed);
    let (xs, _) = draw_sets(SetGenerator::Uniform, MERSENNE_61, 200, 2, seed)?;
    let m = moment_check(&cfg, 1, &xs)?;
    let mut report = Report::default();
    report.push(Check::at_most("moment_l4_block1", m.empirical_moment, m.bound));
    report.push(Check::at_most("moment_margin_x10", 10.0 * m.empirical_moment, m.bound));
    Ok(report)
}

/// Worst relative deviation over 20 random pairs at n = 16k for
/// k ∈ {16, 64, 256}: non-increasing in k and at most 0.25 at k = 256.
fn delta(seed: u64, trials: u64) -> Result<Report> {
    let mut worst = Vec::new();
    for k in [16u64, 64, 256] {
        let params = DkmwParams::new(MERSENNE_61, 16 * k, 2, k, 0.5)?;
        let cfg = mersenne_cfg(params, 8, Mode::MonteCarlo, trials, seed);
        worst.push(delta_scan(&cfg, 20, SetGenerator::Uniform)?.worst_deviation());
    }
    let mut report = Report::default();
    report.push(Check::at_most("delta_trend_k16_k64", worst[1], worst[0]));
    report.push(Check::at_most("delta_trend_k64_k256", worst[2], worst[1]));
    report.push(Check::at_most("delta_worst_k256", worst[2], 0.25));
    Ok(report)
}

/// Exact l-wise independence of the p = 5, l = 3 family: every 3-point
/// table has all counts 1 and every 2-point table all counts 5. The value is
/// the number of point sets whose table is not uniform at that count.
fn independence() -> Result<Report> {
    let field = FieldParams::prime(5)?;
    let l = 3;
    let mut report = Report::default();
    for j in [2usize, 3] {
        let expected = 5u64.pow((l - j) as u32);
        let mut failures = 0;
        for points in subsets(5, j) {
            let table = independence_certificate(field, l, &points)?;
            if table.uniform_count() != Some(expected) {
                failures += 1;
            }
        }
        report.push(Check::at_most(format!("independence_p5_l3_j{j}"), failures as f64, 0.0));
    }
    Ok(report)
}

/// All `j`-subsets of `[0, n)` in lexicographic order.
pub fn subsets(n: u64, j: usize) -> Vec<Vec<u64>> {
    fn go(start: u64, n: u64, j: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() == j {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            go(x + 1, n, j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, j, &mut Vec::new(), &mut out);
    out
}
