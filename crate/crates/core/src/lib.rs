//! One-armed bandits with a covariate: the environment, the estimator-driven
//! policies, forced-sampling schedules, a deterministic Monte Carlo harness,
//! and evaluators for the regret and inferior-sampling bounds.

// Parameter guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod env;
pub mod policy;
pub mod schedule;
pub mod sim;
