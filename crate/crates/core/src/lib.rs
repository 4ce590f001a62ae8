//! Monte Carlo and deterministic tools for time-fractional Cauchy problems
//! driven by inverse stable subordinators.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod harness;
pub mod inverse_time;
pub mod quad;
pub mod rng;
pub mod solver;
pub mod spatial;
pub mod stats;
pub mod subord;

pub use error::{Error, Result};
pub use rng::{PathRng, StreamFactory};
