//! Fill-ratio estimation from noisy binary observations.
//!
//! A robot watches a stream of black/white tiles through a sensor that
//! reports the correct color with some accuracy. From its running tally it
//! forms a maximum-likelihood local estimate of the fill ratio together with
//! a Fisher-information confidence weight, fuses neighbor estimates into a
//! social estimate, and combines both into an informed estimate.

use crate::arena::TileColor;
use thiserror::Error;

/// Assumed accuracies below `0.5 + SINGULAR_MARGIN` or above
/// `1 - SINGULAR_MARGIN` are rejected: the estimator denominator vanishes at
/// 0.5 and the confidence expression divides by zero at 0 and 1.
pub const SINGULAR_MARGIN: f64 = 1e-3;

/// Lowest admissible assumed accuracy.
pub const ASSUMED_ACCURACY_MIN: f64 = 0.5 + SINGULAR_MARGIN;
/// Highest admissible assumed accuracy.
pub const ASSUMED_ACCURACY_MAX: f64 = 1.0 - SINGULAR_MARGIN;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("true accuracy {0} must lie strictly inside (0, 1)")]
    TrueAccuracyOutOfRange(f64),
    #[error("assumed accuracy {0} must lie in [{ASSUMED_ACCURACY_MIN}, {ASSUMED_ACCURACY_MAX}]")]
    AssumedAccuracyOutOfRange(f64),
    #[error("tally has {n} black observations out of {t} total")]
    InvalidTally { n: u64, t: u64 },
    #[error("estimate undefined before the first observation")]
    UndefinedEstimate,
    #[error("confidence degenerate: interior estimate with n = 0 or n = t")]
    DegenerateConfidence,
    #[error("no neighbor messages to fuse")]
    NoNeighbors,
    #[error("all neighbor confidence weights are zero")]
    DegenerateWeights,
    #[error("informed fusion needs alpha + beta > 0")]
    DegenerateFusion,
    #[error("social estimate absent but beta = {0} is nonzero")]
    MissingSocialEstimate(f64),
}

/// True and assumed sensor accuracies. `b`/`w` drive observation generation;
/// `b_hat`/`w_hat` drive every estimation formula and are what the
/// degradation filter rewrites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorAccuracy {
    /// Probability of reading Black when the tile is black.
    pub b: f64,
    /// Probability of reading White when the tile is white.
    pub w: f64,
    /// Assumed black accuracy.
    pub b_hat: f64,
    /// Assumed white accuracy.
    pub w_hat: f64,
}

impl SensorAccuracy {
    /// Symmetric configuration (`w = b`, `w_hat = b_hat`), validated for the
    /// simulator's operating envelope.
    pub fn symmetric(b: f64, b_hat: f64) -> Result<Self, EstimationError> {
        let acc = Self {
            b,
            w: b,
            b_hat,
            w_hat: b_hat,
        };
        acc.validate()?;
        Ok(acc)
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        for true_acc in [self.b, self.w] {
            if !(true_acc > 0.0 && true_acc < 1.0) {
                return Err(EstimationError::TrueAccuracyOutOfRange(true_acc));
            }
        }
        for assumed in [self.b_hat, self.w_hat] {
            if !(ASSUMED_ACCURACY_MIN..=ASSUMED_ACCURACY_MAX).contains(&assumed) {
                return Err(EstimationError::AssumedAccuracyOutOfRange(assumed));
            }
        }
        Ok(())
    }

    /// Replaces both assumed accuracies (the filter treats them as one
    /// quantity under the symmetric model).
    pub fn set_assumed(&mut self, b_hat: f64) {
        self.b_hat = b_hat;
        self.w_hat = b_hat;
    }
}

/// Running observation counts: `n` black readings out of `t` total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObservationTally {
    pub n: u64,
    pub t: u64,
}

impl ObservationTally {
    pub fn new(n: u64, t: u64) -> Result<Self, EstimationError> {
        if n > t {
            return Err(EstimationError::InvalidTally { n, t });
        }
        Ok(Self { n, t })
    }

    pub fn record(&mut self, observed: TileColor) {
        self.t += 1;
        if observed == TileColor::Black {
            self.n += 1;
        }
    }

    /// Observed black fraction `n / t`.
    pub fn ratio(&self) -> Result<f64, EstimationError> {
        if self.t == 0 {
            return Err(EstimationError::UndefinedEstimate);
        }
        Ok(self.n as f64 / self.t as f64)
    }
}

/// One robot's estimates at a single time step. `(x_hat, alpha)` is the unit
/// of inter-robot communication; `x_bar` is absent on rounds with no
/// neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateBundle {
    pub x_hat: f64,
    pub alpha: f64,
    pub x_bar: Option<f64>,
    pub beta: f64,
    pub x: f64,
}

/// Passes a true tile color through the noisy sensor. With a black tile the
/// reading is Black with probability `b`; with a white tile it is White with
/// probability `w`. `draw` is a uniform sample from [0, 1).
pub fn observe(true_color: TileColor, accuracy: &SensorAccuracy, draw: f64) -> TileColor {
    match true_color {
        TileColor::Black => {
            if draw < accuracy.b {
                TileColor::Black
            } else {
                TileColor::White
            }
        }
        TileColor::White => {
            if draw < accuracy.w {
                TileColor::White
            } else {
                TileColor::Black
            }
        }
    }
}

/// Probability of reading Black on a surface with fill ratio `f` through a
/// sensor with accuracies `(b, w)`: `b*f + (1 - w)(1 - f)`.
pub fn black_observation_probability(fill_ratio: f64, b: f64, w: f64) -> f64 {
    b * fill_ratio + (1.0 - w) * (1.0 - fill_ratio)
}

/// Maximum-likelihood fill ratio for an observed black fraction under
/// assumed accuracies, saturated to [0, 1]. The interior expression is
/// `(n/t + w_hat - 1) / (b_hat + w_hat - 1)`.
pub fn mle_fill_ratio(black_fraction: f64, b_hat: f64, w_hat: f64) -> f64 {
    let raw = (black_fraction + w_hat - 1.0) / (b_hat + w_hat - 1.0);
    raw.clamp(0.0, 1.0)
}

/// Local estimate: MLE of the fill ratio from this robot's own tally.
pub fn local_estimate(
    tally: &ObservationTally,
    accuracy: &SensorAccuracy,
) -> Result<f64, EstimationError> {
    let ratio = tally.ratio()?;
    Ok(mle_fill_ratio(ratio, accuracy.b_hat, accuracy.w_hat))
}

/// Local confidence: Fisher information of the tally at the local estimate,
/// with `d = (b_hat + w_hat - 1)^2`. Three branches, selected by the same
/// saturation comparison as the estimate so branch and tally stay
/// consistent.
pub fn local_confidence(
    tally: &ObservationTally,
    accuracy: &SensorAccuracy,
    _x_hat: f64,
) -> Result<f64, EstimationError> {
    let ratio = tally.ratio()?;
    let (b_hat, w_hat) = (accuracy.b_hat, accuracy.w_hat);
    let t = tally.t as f64;
    let n = tally.n as f64;
    let d = (b_hat + w_hat - 1.0).powi(2);
    let raw = (ratio + w_hat - 1.0) / (b_hat + w_hat - 1.0);
    if raw <= 0.0 {
        let num = d * (t * w_hat * w_hat - (2.0 * w_hat - 1.0) * (t - n));
        Ok(num / (w_hat * w_hat * (w_hat - 1.0).powi(2)))
    } else if raw >= 1.0 {
        let num = d * (t * b_hat * b_hat - (2.0 * b_hat - 1.0) * n);
        Ok(num / (b_hat * b_hat * (b_hat - 1.0).powi(2)))
    } else {
        if tally.n == 0 || tally.n == tally.t {
            return Err(EstimationError::DegenerateConfidence);
        }
        Ok(d * t.powi(3) / (n * (t - n)))
    }
}

/// Confidence-weighted fusion of neighbor `(x_hat, alpha)` messages into a
/// social estimate and total social confidence.
pub fn social_fuse(messages: &[(f64, f64)]) -> Result<(f64, f64), EstimationError> {
    if messages.is_empty() {
        return Err(EstimationError::NoNeighbors);
    }
    let mut weighted = 0.0;
    let mut total = 0.0;
    for &(x_hat, alpha) in messages {
        weighted += alpha * x_hat;
        total += alpha;
    }
    if total <= 0.0 {
        return Err(EstimationError::DegenerateWeights);
    }
    Ok((weighted / total, total))
}

/// Convex combination of local and social estimates, weighted by their
/// confidences. With no social estimate (`beta = 0`) the informed estimate
/// is the local one.
pub fn informed_fuse(
    x_hat: f64,
    alpha: f64,
    x_bar: Option<f64>,
    beta: f64,
) -> Result<f64, EstimationError> {
    match x_bar {
        None => {
            if beta != 0.0 {
                return Err(EstimationError::MissingSocialEstimate(beta));
            }
            if alpha <= 0.0 {
                return Err(EstimationError::DegenerateFusion);
            }
            Ok(x_hat)
        }
        Some(x_bar) => {
            if alpha + beta <= 0.0 {
                return Err(EstimationError::DegenerateFusion);
            }
            Ok((alpha * x_hat + beta * x_bar) / (alpha + beta))
        }
    }
}
