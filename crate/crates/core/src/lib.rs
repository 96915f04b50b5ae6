//! Monte Carlo laboratory for per-protocol and instrumental-variables
//! estimators of the complier average causal effect under non-random
//! non-compliance.

pub mod dgm;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod outcomes;
pub mod report;
pub mod scenarios;
