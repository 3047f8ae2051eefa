//! Sweep configuration: a key/value text format with comma-separated lists,
//! expanded into a Cartesian product of experiment cells.
//!
//! Schema (one `key = value` per line, `#` starts a comment):
//!
//! ```text
//! regime       = fully_connected, dynamic   # required
//! filter_mode  = none, only_flawed, all     # required
//! p            = 0, 10, 30, 50, 100         # required, percent flawed
//! tau          = 1000, 2000, 4000           # required, filtering periods
//! b            = 0.55, 0.95                 # required, true accuracies
//! b_hat_flawed = 0.55, 0.75, 0.95           # required, flawed assumed acc.
//! f            = 0.55, 0.95                 # required, target fill ratios
//! base_seed    = 1                          # required
//! output_dir   = results/run1               # required
//! trials       = 30                         # default 30
//! k_max        = 40000                      # default 40000 (steps)
//! delta        = 0.01                       # default 0.01
//! K_max        = 40000                      # default 40000 (score norm.)
//! e_max        = 0.45                       # default 0.45
//! omega        = 0.05                       # default 0.05
//! ```
//!
//! Cells where the flawed assumed accuracy equals the true accuracy are
//! skipped when `p > 0` (those robots would not be flawed); at `p = 0` the
//! `b_hat_flawed` axis collapses to a single cell per remaining combination.

use cpsim_core::estimation::{ASSUMED_ACCURACY_MAX, ASSUMED_ACCURACY_MIN};
use cpsim_core::filter::ActivationConfig;
use cpsim_core::sim::{FilterMode, Regime, TrialConfig, splitmix64};
use std::path::PathBuf;
use thiserror::Error;

/// Robot count for fully connected cells.
pub const FULLY_CONNECTED_N: usize = 10;
/// Robot count for dynamic-topology cells.
pub const DYNAMIC_N: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum SweepParseError {
    #[error("line {line}: expected `key = value`, got {content:?}")]
    BadLine { line: usize, content: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key {key:?} expects {expected}, got {got:?}")]
    BadValue {
        line: usize,
        key: &'static str,
        expected: &'static str,
        got: String,
    },
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("key {key:?}: {reason}")]
    OutOfRange { key: &'static str, reason: String },
}

/// Parsed sweep: value lists per experiment axis plus scalar settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub regimes: Vec<Regime>,
    pub filter_modes: Vec<FilterMode>,
    pub flawed_percents: Vec<u32>,
    pub taus: Vec<u32>,
    pub true_accuracies: Vec<f64>,
    pub flawed_assumed_accuracies: Vec<f64>,
    pub fill_ratios: Vec<f64>,
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub k_max: usize,
    pub delta: f64,
    pub score_k_max: f64,
    pub score_e_max: f64,
    pub omega: f64,
}

/// One point of the sweep's Cartesian product. `index` is the cell's
/// position in the full (unfiltered) product, which keys seed derivation:
/// skipping or reordering cells never changes another cell's seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub regime: Regime,
    pub filter_mode: FilterMode,
    pub flawed_percent: u32,
    pub tau: u32,
    pub true_accuracy: f64,
    pub assumed_accuracy_flawed: f64,
    pub fill_ratio: f64,
}

impl Cell {
    pub fn robot_count(&self) -> usize {
        match self.regime {
            Regime::FullyConnected => FULLY_CONNECTED_N,
            Regime::Dynamic => DYNAMIC_N,
        }
    }

    /// Trial configuration for the given trial replicate of this cell.
    pub fn trial_config(&self, spec: &SweepSpec, trial: usize) -> TrialConfig {
        let base = match self.regime {
            Regime::FullyConnected => TrialConfig::fully_connected(
                self.robot_count(),
                spec.k_max,
                self.fill_ratio,
                self.true_accuracy,
            ),
            Regime::Dynamic => TrialConfig::dynamic(
                self.robot_count(),
                spec.k_max,
                self.fill_ratio,
                self.true_accuracy,
            ),
        };
        TrialConfig {
            assumed_accuracy_flawed: self.assumed_accuracy_flawed,
            flawed_percent: self.flawed_percent,
            filter_mode: self.filter_mode,
            activation: ActivationConfig {
                omega: spec.omega,
                tau: self.tau,
                min_neighbors: 2,
            },
            seed: derive_trial_seed(spec.base_seed, self.index, trial),
            ..base
        }
    }
}

/// Seed for one trial: a pure function of the base seed, the cell's
/// canonical product index, and the trial index.
pub fn derive_trial_seed(base_seed: u64, cell_index: usize, trial_index: usize) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mixed = splitmix64(base_seed.wrapping_add(GOLDEN.wrapping_mul(cell_index as u64 + 1)));
    splitmix64(mixed.wrapping_add(GOLDEN.wrapping_mul(trial_index as u64 + 1)))
}

pub fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::FullyConnected => "fully_connected",
        Regime::Dynamic => "dynamic",
    }
}

pub fn filter_mode_name(mode: FilterMode) -> &'static str {
    match mode {
        FilterMode::None => "none",
        FilterMode::OnlyFlawed => "only_flawed",
        FilterMode::All => "all",
    }
}

fn parse_regime(token: &str) -> Option<Regime> {
    match token {
        "fully_connected" => Some(Regime::FullyConnected),
        "dynamic" => Some(Regime::Dynamic),
        _ => None,
    }
}

fn parse_filter_mode(token: &str) -> Option<FilterMode> {
    match token {
        "none" => Some(FilterMode::None),
        "only_flawed" => Some(FilterMode::OnlyFlawed),
        "all" => Some(FilterMode::All),
        _ => None,
    }
}

struct RawEntry {
    line: usize,
    value: String,
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|t| !t.is_empty())
}

impl SweepSpec {
    /// Number of cells in the raw Cartesian product, before validity
    /// filtering.
    pub fn product_cell_count(&self) -> usize {
        self.regimes.len()
            * self.filter_modes.len()
            * self.flawed_percents.len()
            * self.taus.len()
            * self.true_accuracies.len()
            * self.flawed_assumed_accuracies.len()
            * self.fill_ratios.len()
    }

    /// Expands the product into the valid cell set. Ordering is the fixed
    /// nesting regime > filter_mode > p > tau > b > b_hat_flawed > f.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        let mut index = 0;
        for &regime in &self.regimes {
            for &filter_mode in &self.filter_modes {
                for &flawed_percent in &self.flawed_percents {
                    for &tau in &self.taus {
                        for &true_accuracy in &self.true_accuracies {
                            for (b_hat_idx, &assumed) in
                                self.flawed_assumed_accuracies.iter().enumerate()
                            {
                                for &fill_ratio in &self.fill_ratios {
                                    let keep = if flawed_percent == 0 {
                                        // No flawed robots: the b_hat axis
                                        // collapses to one representative.
                                        b_hat_idx == 0
                                    } else {
                                        assumed != true_accuracy
                                    };
                                    if keep {
                                        cells.push(Cell {
                                            index,
                                            regime,
                                            filter_mode,
                                            flawed_percent,
                                            tau,
                                            true_accuracy,
                                            assumed_accuracy_flawed: if flawed_percent == 0 {
                                                true_accuracy
                                            } else {
                                                assumed
                                            },
                                            fill_ratio,
                                        });
                                    }
                                    index += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    /// Warnings about percent values that quantize on the per-regime robot
    /// counts (e.g. 37% of 20 robots rounds to 7, which is 35%).
    pub fn quantization_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for &regime in &self.regimes {
            let n = match regime {
                Regime::FullyConnected => FULLY_CONNECTED_N,
                Regime::Dynamic => DYNAMIC_N,
            };
            for &p in &self.flawed_percents {
                let flagged = (p as f64 * n as f64 / 100.0).round() as usize;
                if flagged * 100 != p as usize * n {
                    warnings.push(format!(
                        "p = {p}% of {n} robots ({}) rounds to {flagged} flawed robots ({}%)",
                        regime_name(regime),
                        flagged * 100 / n,
                    ));
                }
            }
        }
        warnings
    }
}

/// Parses and validates a sweep configuration document.
pub fn parse_sweep(text: &str) -> Result<SweepSpec, SweepParseError> {
    const KEYS: [&str; 15] = [
        "regime",
        "filter_mode",
        "p",
        "tau",
        "b",
        "b_hat_flawed",
        "f",
        "trials",
        "base_seed",
        "output_dir",
        "k_max",
        "delta",
        "K_max",
        "e_max",
        "omega",
    ];
    let mut entries: Vec<(&'static str, RawEntry)> = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(SweepParseError::BadLine {
                line,
                content: content.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let Some(&canonical) = KEYS.iter().find(|k| **k == key) else {
            return Err(SweepParseError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if entries.iter().any(|(k, _)| *k == canonical) {
            return Err(SweepParseError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        entries.push((
            canonical,
            RawEntry {
                line,
                value: value.to_string(),
            },
        ));
    }

    let take = |key: &'static str| entries.iter().find(|(k, _)| *k == key).map(|(_, e)| e);
    let required = |key: &'static str| take(key).ok_or(SweepParseError::MissingKey(key));

    fn parse_list<T>(
        entry: &RawEntry,
        key: &'static str,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<Vec<T>, SweepParseError> {
        let values: Vec<T> = split_list(&entry.value)
            .map(|token| {
                parse(token).ok_or(SweepParseError::BadValue {
                    line: entry.line,
                    key,
                    expected,
                    got: token.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.is_empty() {
            return Err(SweepParseError::BadValue {
                line: entry.line,
                key,
                expected,
                got: entry.value.clone(),
            });
        }
        Ok(values)
    }

    fn parse_scalar<T>(
        entry: &RawEntry,
        key: &'static str,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T, SweepParseError> {
        parse(entry.value.trim()).ok_or(SweepParseError::BadValue {
            line: entry.line,
            key,
            expected,
            got: entry.value.clone(),
        })
    }

    let regimes = parse_list(
        required("regime")?,
        "regime",
        "fully_connected | dynamic",
        parse_regime,
    )?;
    let filter_modes = parse_list(
        required("filter_mode")?,
        "filter_mode",
        "none | only_flawed | all",
        parse_filter_mode,
    )?;
    let flawed_percents = parse_list(required("p")?, "p", "integer percent list", |t| {
        t.parse::<u32>().ok()
    })?;
    let taus = parse_list(required("tau")?, "tau", "positive integer list", |t| {
        t.parse::<u32>().ok()
    })?;
    let true_accuracies = parse_list(required("b")?, "b", "decimal list", |t| {
        t.parse::<f64>().ok()
    })?;
    let flawed_assumed_accuracies = parse_list(
        required("b_hat_flawed")?,
        "b_hat_flawed",
        "decimal list",
        |t| t.parse::<f64>().ok(),
    )?;
    let fill_ratios = parse_list(required("f")?, "f", "decimal list", |t| {
        t.parse::<f64>().ok()
    })?;
    let base_seed = parse_scalar(
        required("base_seed")?,
        "base_seed",
        "64-bit unsigned integer",
        |t| t.parse::<u64>().ok(),
    )?;
    let output_dir = {
        let entry = required("output_dir")?;
        if entry.value.is_empty() {
            return Err(SweepParseError::BadValue {
                line: entry.line,
                key: "output_dir",
                expected: "non-empty path",
                got: String::new(),
            });
        }
        PathBuf::from(&entry.value)
    };

    let trials_per_cell = match take("trials") {
        Some(e) => parse_scalar(e, "trials", "positive integer", |t| t.parse::<usize>().ok())?,
        None => 30,
    };
    let k_max = match take("k_max") {
        Some(e) => parse_scalar(e, "k_max", "positive integer", |t| t.parse::<usize>().ok())?,
        None => 40_000,
    };
    let delta = match take("delta") {
        Some(e) => parse_scalar(e, "delta", "decimal", |t| t.parse::<f64>().ok())?,
        None => 0.01,
    };
    let score_k_max = match take("K_max") {
        Some(e) => parse_scalar(e, "K_max", "decimal", |t| t.parse::<f64>().ok())?,
        None => 40_000.0,
    };
    let score_e_max = match take("e_max") {
        Some(e) => parse_scalar(e, "e_max", "decimal", |t| t.parse::<f64>().ok())?,
        None => 0.45,
    };
    let omega = match take("omega") {
        Some(e) => parse_scalar(e, "omega", "decimal", |t| t.parse::<f64>().ok())?,
        None => 0.05,
    };

    let spec = SweepSpec {
        regimes,
        filter_modes,
        flawed_percents,
        taus,
        true_accuracies,
        flawed_assumed_accuracies,
        fill_ratios,
        trials_per_cell,
        base_seed,
        output_dir,
        k_max,
        delta,
        score_k_max,
        score_e_max,
        omega,
    };
    validate(&spec)?;
    Ok(spec)
}

fn validate(spec: &SweepSpec) -> Result<(), SweepParseError> {
    let range_err = |key, reason: String| Err(SweepParseError::OutOfRange { key, reason });
    for &p in &spec.flawed_percents {
        if p > 100 {
            return range_err("p", format!("{p} exceeds 100"));
        }
    }
    for &tau in &spec.taus {
        if tau == 0 {
            return range_err("tau", "must be at least 1".into());
        }
    }
    for &b in &spec.true_accuracies {
        if !(b > 0.0 && b < 1.0) {
            return range_err("b", format!("{b} outside (0, 1)"));
        }
    }
    for &b_hat in &spec.flawed_assumed_accuracies {
        if !(ASSUMED_ACCURACY_MIN..=ASSUMED_ACCURACY_MAX).contains(&b_hat) {
            return range_err(
                "b_hat_flawed",
                format!("{b_hat} outside [{ASSUMED_ACCURACY_MIN}, {ASSUMED_ACCURACY_MAX}]"),
            );
        }
    }
    for &f in &spec.fill_ratios {
        if !(0.0..=1.0).contains(&f) {
            return range_err("f", format!("{f} outside [0, 1]"));
        }
    }
    if spec.trials_per_cell == 0 {
        return range_err("trials", "must be at least 1".into());
    }
    if spec.k_max == 0 {
        return range_err("k_max", "must be at least 1".into());
    }
    if spec.delta.is_nan() || spec.delta <= 0.0 {
        return range_err("delta", "must be positive".into());
    }
    if spec.score_k_max.is_nan() || spec.score_k_max <= 0.0 {
        return range_err("K_max", "must be positive".into());
    }
    if spec.score_e_max.is_nan() || spec.score_e_max <= 0.0 {
        return range_err("e_max", "must be positive".into());
    }
    if !(spec.omega > 0.0 && spec.omega < 1.0) {
        return range_err("omega", "must lie strictly inside (0, 1)".into());
    }
    Ok(())
}
