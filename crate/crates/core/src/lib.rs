//! Simulation and verification tools for additive and multiplicative
//! patterns in Bernoulli random subsets of the positive integers.

pub mod detect;
pub mod error;
pub mod model;
pub mod patterns;
pub mod primes;
pub mod serde_util;
pub mod stats;
pub mod clt;
pub mod color;

pub use error::{Error, Result};
pub use model::{DenseSample, MemoryBudget, SubsetModel};
pub use patterns::{PatternInstance, PatternKind, ProbeFamily, ProbeLimits};
