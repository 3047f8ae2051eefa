//! Collective fill-ratio perception with adaptive sensor self-calibration.
//!
//! A swarm of robots with imperfect binary ground sensors estimates the
//! fraction of black tiles in its environment. Each robot maintains a
//! maximum-likelihood local estimate weighted by Fisher-information
//! confidence, fuses neighbor estimates into social and informed estimates,
//! and can self-calibrate a wrongly assumed sensor accuracy through a
//! t-test-gated degradation filter.
//!
//! Modules:
//! - [`arena`]: tiled environments (generation, text grids, queries)
//! - [`estimation`]: observation model, local/social/informed estimates
//! - [`student_t`]: t-distribution CDF and quantile numerics
//! - [`filter`]: adaptive degradation filter and activation test
//! - [`sim`]: synchronous-round trials in both communication regimes
//! - [`metrics`]: convergence/accuracy scoring of trial logs

pub mod arena;
pub mod estimation;
pub mod filter;
pub mod metrics;
pub mod sim;
pub mod student_t;
