//! Randomized algorithms for maximizing non-negative (possibly non-monotone)
//! submodular functions subject to k-system constraints.
//!
//! The crate is organized around two black-box oracles:
//!
//! - [`systems::IndependenceSystem`]: membership in a down-closed family `I`,
//!   with a declared `k` for which the family is a k-system.
//! - [`objectives::SetFunction`]: a non-negative submodular set function.
//!
//! Algorithms never call these traits directly. They go through the counting
//! handles in [`oracle`], which tally value and independence queries per run
//! so concurrent runs can share one immutable instance.
//!
//! Algorithms:
//!
//! - [`greedy::random_multi_greedy`] and its lazy-evaluation variant
//!   [`greedy::accelerated_random_multi_greedy`]
//! - [`greedy::standard_greedy`] and the [`greedy::repeated_greedy`] baseline
//! - [`batched::batched_random_greedy`], a low-adaptivity threshold sweep
//! - [`adaptive::adapt_random_greedy`], a policy for stochastic states
//!
//! [`verify`] holds the brute-force oracles used to check approximation
//! guarantees on small instances.

pub mod adaptive;
pub mod batched;
mod error;
pub mod greedy;
pub mod objectives;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use oracle::{IndependenceOracle, ValueOracle};
pub use report::{RoundLedger, RunReport};

/// Gains at or below this value are treated as non-positive.
pub const GAIN_TOLERANCE: f64 = 1e-12;

/// Environment variable enabling the invariant re-scans inside algorithms.
pub const DEBUG_ASSERT_ENV: &str = "KSYS_DEBUG_ASSERT";

/// Whether `KSYS_DEBUG_ASSERT=1` is set in the environment.
pub fn debug_asserts_from_env() -> bool {
    std::env::var(DEBUG_ASSERT_ENV).map(|v| v == "1").unwrap_or(false)
}
