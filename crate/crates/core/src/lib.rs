//! Approximately d-k-min-wise independent hashing.
//!
//! A random polynomial of degree `l - 1` over a prime field is an `l`-wise
//! independent hash function. For `l >= 3d + 2` and `k` above a threshold
//! that depends only on `d`, `l` and the error `ε`, every `d`-subset of a set
//! lands in the set's bottom `k` with probability `C(k,d)/C(n,d)·(1 ± ε)`.
//! With `d = 2` that makes the `k` samples of a bottom-k sketch pairwise
//! independent, which is all a Chebyshev argument needs; a median over a few
//! sketches then amplifies the confidence.
//!
//! Modules:
//! - [`hash_family`]: the polynomial family, sampling, enumeration and exact
//!   independence tables.
//! - [`sketch`]: ranks, the bottom-k inclusion event and the mergeable
//!   bottom-k sketch.
//! - [`analysis`]: exact probabilities, parameter thresholds, block geometry
//!   and bounds.
//! - [`verifier`]: Monte Carlo and exhaustive measurement of the bounded
//!   quantities.
//! - [`estimators`] and [`format`]: Jaccard and rarity estimation over
//!   sketch bundles, and the binary bundle file.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod format;
pub mod hash_family;
pub mod rng;
pub mod sketch;
pub mod suites;
pub mod verifier;

pub use error::{Error, Result};
pub use exec::Execution;
pub use hash_family::{FieldParams, PolyHashFunction, MERSENNE_61};
pub use sketch::{BottomKSketch, DkmwParams, HashedPoint};
