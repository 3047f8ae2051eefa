//! Adaptive sensor degradation filter: a t-test gate that decides when a
//! robot's local estimate disagrees with its neighbors, and the assumed
//! accuracy update that follows a rejection.
//!
//! The gate rejects similarity whenever
//! `|X_bar - x_hat| > (t_{m-1,(1-omega)/2} / sqrt(m) + 1) * S`
//! over the current step's `m >= 2` neighbor estimates, where `X_bar` and
//! `S` are the plain sample mean and sample standard deviation. The update
//! inverts the local-estimate formula around the social estimate.

use crate::estimation::{
    ASSUMED_ACCURACY_MAX, ASSUMED_ACCURACY_MIN, EstimationError, ObservationTally,
};
use crate::student_t;
use thiserror::Error;

/// The accuracy update is skipped when the social estimate sits this close
/// to 1/2, where the inversion is singular.
pub const SOCIAL_SINGULARITY_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("type II error probability {0} must lie strictly inside (0, 1)")]
    InvalidOmega(f64),
    #[error("upper-tail probability {0} must lie in (0, 0.5]")]
    InvalidTailProbability(f64),
    #[error("degrees of freedom must be at least 1")]
    InvalidDegreesOfFreedom,
    #[error("nominal filtering period must be at least 1")]
    InvalidPeriod,
    #[error("hypothesis test needs at least {required} neighbors, got {got}")]
    InsufficientNeighbors { got: usize, required: usize },
    #[error("degrees of freedom {0} beyond precomputed table")]
    DegreesOfFreedomOutOfTable(usize),
    #[error("social estimate too close to 1/2; accuracy update singular")]
    SingularSocialEstimate,
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// When and how the filter may fire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationConfig {
    /// Type II error probability of the similarity test.
    pub omega: f64,
    /// Nominal filtering period in time steps; a robot becomes
    /// filter-eligible every `tau` steps.
    pub tau: u32,
    /// Minimum current-step neighbor count required to run the test.
    pub min_neighbors: usize,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            omega: 0.05,
            tau: 1000,
            min_neighbors: 2,
        }
    }
}

impl ActivationConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(FilterError::InvalidOmega(self.omega));
        }
        if self.tau == 0 {
            return Err(FilterError::InvalidPeriod);
        }
        if self.min_neighbors < 2 {
            return Err(FilterError::InsufficientNeighbors {
                got: self.min_neighbors,
                required: 2,
            });
        }
        Ok(())
    }
}

/// Upper-tail t score: the q with `P(T_df > q) = upper_tail`.
pub fn t_quantile(df: usize, upper_tail: f64) -> Result<f64, FilterError> {
    if df < 1 {
        return Err(FilterError::InvalidDegreesOfFreedom);
    }
    if !(upper_tail > 0.0 && upper_tail <= 0.5) {
        return Err(FilterError::InvalidTailProbability(upper_tail));
    }
    Ok(student_t::upper_tail_quantile(df as f64, upper_tail))
}

/// Precomputed `t_{df, (1-omega)/2}` scores for df = 1..=max_df, so the
/// per-step test is a table lookup.
#[derive(Debug, Clone)]
pub struct TQuantileTable {
    omega: f64,
    entries: Vec<f64>,
}

impl TQuantileTable {
    pub fn new(omega: f64, max_df: usize) -> Result<Self, FilterError> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(FilterError::InvalidOmega(omega));
        }
        let tail = (1.0 - omega) / 2.0;
        let entries = (1..=max_df)
            .map(|df| t_quantile(df, tail))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { omega, entries })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn max_df(&self) -> usize {
        self.entries.len()
    }

    pub fn t_score(&self, df: usize) -> Result<f64, FilterError> {
        if df < 1 {
            return Err(FilterError::InvalidDegreesOfFreedom);
        }
        self.entries
            .get(df - 1)
            .copied()
            .ok_or(FilterError::DegreesOfFreedomOutOfTable(df))
    }
}

/// Rejection threshold `c = t_{m-1,(1-omega)/2} + sqrt(m)` for `m` neighbor
/// samples.
pub fn activation_threshold(m: usize, omega: f64) -> Result<f64, FilterError> {
    if m < 2 {
        return Err(FilterError::InsufficientNeighbors {
            got: m,
            required: 2,
        });
    }
    if !(omega > 0.0 && omega < 1.0) {
        return Err(FilterError::InvalidOmega(omega));
    }
    Ok(t_quantile(m - 1, (1.0 - omega) / 2.0)? + (m as f64).sqrt())
}

fn sample_mean_and_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (m - 1.0)).sqrt())
}

fn decide(x_hat_self: f64, neighbor_estimates: &[f64], t_score: f64) -> bool {
    let (mean, sd) = sample_mean_and_sd(neighbor_estimates);
    if sd == 0.0 {
        // Zero spread with a mean mismatch: the statistic diverges.
        return mean != x_hat_self;
    }
    let m = neighbor_estimates.len() as f64;
    (mean - x_hat_self).abs() > (t_score / m.sqrt() + 1.0) * sd
}

/// Runs the similarity test against the current step's neighbor estimates.
/// Returns true when the robot should update its assumed accuracy.
pub fn should_activate(
    x_hat_self: f64,
    neighbor_estimates: &[f64],
    omega: f64,
) -> Result<bool, FilterError> {
    let m = neighbor_estimates.len();
    if m < 2 {
        return Err(FilterError::InsufficientNeighbors {
            got: m,
            required: 2,
        });
    }
    let t_score = t_quantile(m - 1, (1.0 - omega) / 2.0)?;
    Ok(decide(x_hat_self, neighbor_estimates, t_score))
}

/// Table-backed variant of [`should_activate`] for the per-step loop.
pub fn should_activate_with_table(
    x_hat_self: f64,
    neighbor_estimates: &[f64],
    table: &TQuantileTable,
) -> Result<bool, FilterError> {
    let m = neighbor_estimates.len();
    if m < 2 {
        return Err(FilterError::InsufficientNeighbors {
            got: m,
            required: 2,
        });
    }
    Ok(decide(
        x_hat_self,
        neighbor_estimates,
        table.t_score(m - 1)?,
    ))
}

/// Inversion of the local-estimate formula at an observed black fraction,
/// using the social estimate in place of the unknown fill ratio:
/// `(n/t + x_bar - 1) / (2 x_bar - 1)`, clamped to the admissible assumed
/// accuracy band.
pub fn update_assumed_accuracy_from_ratio(
    black_fraction: f64,
    x_bar: f64,
) -> Result<f64, FilterError> {
    if (2.0 * x_bar - 1.0).abs() <= SOCIAL_SINGULARITY_EPS {
        return Err(FilterError::SingularSocialEstimate);
    }
    let raw = (black_fraction + x_bar - 1.0) / (2.0 * x_bar - 1.0);
    Ok(raw.clamp(ASSUMED_ACCURACY_MIN, ASSUMED_ACCURACY_MAX))
}

/// Assumed accuracy update from a robot's own tally. The returned value
/// replaces both assumed accuracies under the symmetric sensor model.
pub fn update_assumed_accuracy(tally: &ObservationTally, x_bar: f64) -> Result<f64, FilterError> {
    let ratio = tally.ratio()?;
    update_assumed_accuracy_from_ratio(ratio, x_bar)
}
