//! Convergence and accuracy scoring of informed-estimate trajectories.
//!
//! A trajectory's convergence step `K` is the first index after which the
//! estimate stays within `delta` of its value there; the error `e` is the
//! absolute distance to ground truth at `K`. Individual scores normalize
//! both against configured maxima, trial scores average them with an
//! interquartile-range consensus penalty, and the combined score `H` is
//! their mean.

use crate::sim::TrialLog;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("score normalization constants must be positive, got K_max={k_max}, e_max={e_max}")]
    InvalidNormalization { k_max: f64, e_max: f64 },
    #[error("convergence step {k} exceeds K_max={k_max}")]
    StepBeyondNormalization { k: usize, k_max: f64 },
    #[error("no robots to score")]
    EmptyScoreInput,
    #[error("per-robot K and e lists differ in length: {k_len} vs {e_len}")]
    MismatchedLengths { k_len: usize, e_len: usize },
}

/// Scoring constants. `k_max` and `e_max` normalize the convergence and
/// error scores; `delta` is the settling threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConstants {
    pub delta: f64,
    pub k_max: f64,
    pub e_max: f64,
}

impl Default for ScoreConstants {
    fn default() -> Self {
        Self {
            delta: 0.01,
            k_max: 40_000.0,
            e_max: 0.45,
        }
    }
}

/// Scores for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// Per-robot convergence step.
    pub convergence_steps: Vec<usize>,
    /// Per-robot absolute error at the convergence step.
    pub errors: Vec<f64>,
    /// Trial convergence score (IQR-penalized mean of individual scores).
    pub h_k: f64,
    /// Trial accuracy score (IQR-penalized mean of individual scores).
    pub h_e: f64,
    /// Combined score, the mean of `h_k` and `h_e`.
    pub combined: f64,
    pub constants: ScoreConstants,
}

/// Smallest step `K` such that `|x[K] - x[k]| < delta` for every `k >= K`.
/// The last index always qualifies, so a step always exists.
pub fn convergence_step(trajectory: &[f64], delta: f64) -> usize {
    assert!(!trajectory.is_empty(), "trajectory must be non-empty");
    assert!(delta > 0.0, "delta must be positive");
    let n = trajectory.len();
    // Suffix extrema, computed right to left.
    let mut suffix_max = vec![0.0f64; n];
    let mut suffix_min = vec![0.0f64; n];
    suffix_max[n - 1] = trajectory[n - 1];
    suffix_min[n - 1] = trajectory[n - 1];
    for k in (0..n - 1).rev() {
        suffix_max[k] = trajectory[k].max(suffix_max[k + 1]);
        suffix_min[k] = trajectory[k].min(suffix_min[k + 1]);
    }
    for k in 0..n {
        let x = trajectory[k];
        if suffix_max[k] - x < delta && x - suffix_min[k] < delta {
            return k;
        }
    }
    n - 1
}

/// Absolute error of the trajectory at step `k` against the ground-truth
/// fill ratio.
pub fn estimate_error(trajectory: &[f64], k: usize, truth: f64) -> f64 {
    assert!(k < trajectory.len(), "step {k} out of range");
    (trajectory[k] - truth).abs()
}

/// Normalized per-robot scores `100 (K_max - K) / K_max` and
/// `100 (e_max - e) / e_max`. The error is clipped to `e_max` so a
/// pathological run scores zero rather than negative.
pub fn individual_scores(
    k: usize,
    e: f64,
    constants: &ScoreConstants,
) -> Result<(f64, f64), MetricsError> {
    if constants.k_max.is_nan()
        || constants.k_max <= 0.0
        || constants.e_max.is_nan()
        || constants.e_max <= 0.0
    {
        return Err(MetricsError::InvalidNormalization {
            k_max: constants.k_max,
            e_max: constants.e_max,
        });
    }
    if (k as f64) > constants.k_max {
        return Err(MetricsError::StepBeyondNormalization {
            k,
            k_max: constants.k_max,
        });
    }
    let h_k = 100.0 * (constants.k_max - k as f64) / constants.k_max;
    let e = e.min(constants.e_max);
    let h_e = 100.0 * (constants.e_max - e) / constants.e_max;
    Ok((h_k, h_e))
}

/// Linear-interpolation quantile of a sorted slice (positions
/// `(n - 1) * p` between order statistics).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

fn interquartile_range(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

/// Trial scores: the mean of the individual scores scaled by
/// `exp(-IQR / max)`, with the IQR taken over the raw `K` and `e` values.
pub fn trial_scores(
    convergence_steps: &[usize],
    errors: &[f64],
    constants: &ScoreConstants,
) -> Result<(f64, f64), MetricsError> {
    if convergence_steps.is_empty() || errors.is_empty() {
        return Err(MetricsError::EmptyScoreInput);
    }
    if convergence_steps.len() != errors.len() {
        return Err(MetricsError::MismatchedLengths {
            k_len: convergence_steps.len(),
            e_len: errors.len(),
        });
    }
    let mut sum_h_k = 0.0;
    let mut sum_h_e = 0.0;
    for (&k, &e) in convergence_steps.iter().zip(errors) {
        let (h_k, h_e) = individual_scores(k, e, constants)?;
        sum_h_k += h_k;
        sum_h_e += h_e;
    }
    let n = convergence_steps.len() as f64;
    // The IQR penalty works on the raw K and e values; clipping applies
    // only to the individual scores.
    let raw_k: Vec<f64> = convergence_steps.iter().map(|&k| k as f64).collect();
    let iqr_k = interquartile_range(&raw_k);
    let iqr_e = interquartile_range(errors);
    let h_k = sum_h_k / n * (-iqr_k / constants.k_max).exp();
    let h_e = sum_h_e / n * (-iqr_e / constants.e_max).exp();
    Ok((h_k, h_e))
}

/// Combined trial score: the mean of the two scaled scores.
pub fn combined_score(h_k: f64, h_e: f64) -> f64 {
    0.5 * (h_k + h_e)
}

/// Full scoring pipeline over a trial log's informed-estimate trajectories,
/// using the log's realized fill ratio as ground truth.
pub fn score_trial(
    log: &TrialLog,
    constants: &ScoreConstants,
) -> Result<ScoreReport, MetricsError> {
    score_trajectories(
        log.robots.iter().map(|r| r.informed.as_slice()),
        log.realized_fill_ratio,
        constants,
    )
}

/// Scoring pipeline over raw trajectories against an explicit ground truth.
pub fn score_trajectories<'a>(
    trajectories: impl IntoIterator<Item = &'a [f64]>,
    truth: f64,
    constants: &ScoreConstants,
) -> Result<ScoreReport, MetricsError> {
    let mut convergence_steps = Vec::new();
    let mut errors = Vec::new();
    for trajectory in trajectories {
        let k = convergence_step(trajectory, constants.delta);
        convergence_steps.push(k);
        errors.push(estimate_error(trajectory, k, truth));
    }
    let (h_k, h_e) = trial_scores(&convergence_steps, &errors, constants)?;
    Ok(ScoreReport {
        convergence_steps,
        errors,
        h_k,
        h_e,
        combined: combined_score(h_k, h_e),
        constants: *constants,
    })
}
