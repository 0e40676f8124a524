//! Trial execution: rayon when the `parallel` feature is on, a plain loop
//! otherwise. Callers reduce with integer counters only, so results are
//! identical under either strategy.

use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    /// Runs on the rayon pool; falls back to a loop without the `parallel`
    /// feature.
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Folds every index in `range` into an accumulator, with one scratch value
/// per worker, then merges worker accumulators with `combine`. `combine`
/// must be associative and commutative for the result to be independent of
/// the execution strategy.
pub fn fold_reduce<T, S, MS, ID, F, C>(
    exec: Execution,
    range: Range<u64>,
    make_scratch: MS,
    identity: ID,
    fold: F,
    combine: C,
) -> T
where
    T: Send,
    S: Send,
    MS: Fn() -> S + Sync + Send,
    ID: Fn() -> T + Sync + Send,
    F: Fn(T, &mut S, u64) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            range
                .into_par_iter()
                .fold(
                    || (make_scratch(), identity()),
                    |(mut scratch, acc), i| {
                        let acc = fold(acc, &mut scratch, i);
                        (scratch, acc)
                    },
                )
                .map(|(_, acc)| acc)
                .reduce(&identity, &combine)
        }
        _ => {
            let _ = combine;
            let mut scratch = make_scratch();
            range.fold(identity(), |acc, i| fold(acc, &mut scratch, i))
        }
    }
}

/// Counts the indices in `range` for which `hit` returns true.
pub fn count_hits<S, MS, F>(exec: Execution, range: Range<u64>, make_scratch: MS, hit: F) -> u64
where
    S: Send,
    MS: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64) -> bool + Sync + Send,
{
    fold_reduce(
        exec,
        range,
        make_scratch,
        || 0u64,
        |acc, s, i| acc + hit(s, i) as u64,
        |a, b| a + b,
    )
}

/// Maps every index in `range` through `f`, preserving order.
pub fn map_collect<T, F>(exec: Execution, range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            range.into_par_iter().map(f).collect()
        }
        _ => range.map(f).collect(),
    }
}
