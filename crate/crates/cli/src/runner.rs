//! Sweep execution: fans trials out over a worker pool, scores each trial,
//! and persists flat CSV results.
//!
//! Outputs under the sweep's `output_dir`:
//! - `results.csv`: one row per trial
//!   (`regime,filter_mode,P,tau,b,b_hat_flawed,f,trial,seed,realized_fill_ratio,h_K,h_e,H`)
//! - `robot_stats.csv`: per-robot convergence step and error, keyed by
//!   `(cell,trial,robot)`
//! - `summary.csv`: per-cell quartiles of the combined score `H`
//! - `logs/cell####_trial###.csv`: full trial logs, written only on request
//!
//! Worker count comes from the `CPSIM_WORKERS` environment variable when not
//! given explicitly; the default is one worker per core. Results are ordered
//! by (cell, trial) before writing, so parallel and sequential runs produce
//! identical files.

use crate::logfile;
use crate::sweep::{Cell, SweepSpec, filter_mode_name, regime_name};
use anyhow::{Context, Result};
use cpsim_core::metrics::{self, ScoreConstants, ScoreReport};
use cpsim_core::sim::run_trial;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

pub const WORKERS_ENV_VAR: &str = "CPSIM_WORKERS";

/// Outcome of one scored trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub cell: Cell,
    pub trial: usize,
    pub seed: u64,
    pub realized_fill_ratio: f64,
    pub report: ScoreReport,
}

/// Per-cell distribution of the combined score.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub cell: Cell,
    pub trials: usize,
    pub h_q1: f64,
    pub h_median: f64,
    pub h_q3: f64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<CellSummary>,
    pub results_path: PathBuf,
    pub robot_stats_path: PathBuf,
    pub summary_path: PathBuf,
}

pub fn score_constants(spec: &SweepSpec) -> ScoreConstants {
    ScoreConstants {
        delta: spec.delta,
        k_max: spec.score_k_max,
        e_max: spec.score_e_max,
    }
}

fn worker_count(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| {
        std::env::var(WORKERS_ENV_VAR)
            .ok()
            .and_then(|raw| raw.trim().parse().ok())
    })
}

/// Runs every (cell, trial) job of the sweep and writes the result files.
/// `workers` overrides the `CPSIM_WORKERS` environment variable; `None`
/// falls back to it and then to all cores.
pub fn run_sweep(
    spec: &SweepSpec,
    dump_logs: bool,
    workers: Option<usize>,
) -> Result<SweepOutcome> {
    let cells = spec.cells();
    let jobs: Vec<(Cell, usize)> = cells
        .iter()
        .flat_map(|cell| (0..spec.trials_per_cell).map(move |trial| (*cell, trial)))
        .collect();

    let out_dir = &spec.output_dir;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let logs_dir = out_dir.join("logs");
    if dump_logs {
        fs::create_dir_all(&logs_dir)?;
    }

    let constants = score_constants(spec);
    let execute = || -> Result<Vec<TrialRecord>> {
        jobs.par_iter()
            .map(|&(cell, trial)| {
                let config = cell.trial_config(spec, trial);
                let log = run_trial(&config, None).with_context(|| {
                    format!("cell {} trial {trial} (seed {})", cell.index, config.seed)
                })?;
                let report = metrics::score_trial(&log, &constants)
                    .with_context(|| format!("scoring cell {} trial {trial}", cell.index))?;
                if dump_logs {
                    let name = format!("cell{:04}_trial{:03}.csv", cell.index, trial);
                    logfile::write_trial_log(&logs_dir.join(name), &log)?;
                }
                Ok(TrialRecord {
                    cell,
                    trial,
                    seed: config.seed,
                    realized_fill_ratio: log.realized_fill_ratio,
                    report,
                })
            })
            .collect()
    };
    let records = match worker_count(workers) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("building worker pool")?
            .install(execute),
        None => execute(),
    }?;

    let summaries = summarize(&records);
    let files = [
        ("results.csv", render_results(&records)),
        ("robot_stats.csv", render_robot_stats(&records)),
        ("summary.csv", render_summary(&summaries)),
    ];
    let mut written: Vec<String> = Vec::new();
    for (name, content) in &files {
        match fs::write(out_dir.join(name), content) {
            Ok(()) => written.push(format!("{name}: {} bytes", content.len())),
            Err(err) => {
                // Leave a manifest of what did land before aborting.
                let mut manifest = written.join("\n");
                let _ = writeln!(manifest, "\nFAILED {name}: {err}");
                let _ = fs::write(out_dir.join("partial_manifest.txt"), manifest);
                return Err(err).with_context(|| format!("writing {name}"));
            }
        }
    }

    Ok(SweepOutcome {
        records,
        summaries,
        results_path: out_dir.join("results.csv"),
        robot_stats_path: out_dir.join("robot_stats.csv"),
        summary_path: out_dir.join("summary.csv"),
    })
}

pub const RESULTS_HEADER: &str =
    "regime,filter_mode,P,tau,b,b_hat_flawed,f,trial,seed,realized_fill_ratio,h_K,h_e,H";

fn cell_fields(cell: &Cell) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        regime_name(cell.regime),
        filter_mode_name(cell.filter_mode),
        cell.flawed_percent,
        cell.tau,
        cell.true_accuracy,
        cell.assumed_accuracy_flawed,
        cell.fill_ratio,
    )
}

fn render_results(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for record in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            cell_fields(&record.cell),
            record.trial,
            record.seed,
            record.realized_fill_ratio,
            record.report.h_k,
            format_args!("{},{}", record.report.h_e, record.report.combined),
        )
        .expect("writing to string");
    }
    out
}

fn render_robot_stats(records: &[TrialRecord]) -> String {
    let mut out = String::from("cell,trial,robot,K,e\n");
    for record in records {
        for (robot, (k, e)) in record
            .report
            .convergence_steps
            .iter()
            .zip(&record.report.errors)
            .enumerate()
        {
            writeln!(
                out,
                "{},{},{robot},{k},{e}",
                record.cell.index, record.trial
            )
            .expect("writing to string");
        }
    }
    out
}

fn render_summary(summaries: &[CellSummary]) -> String {
    let mut out =
        String::from("regime,filter_mode,P,tau,b,b_hat_flawed,f,trials,H_q1,H_median,H_q3\n");
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{}",
            cell_fields(&s.cell),
            s.trials,
            s.h_q1,
            s.h_median,
            s.h_q3,
        )
        .expect("writing to string");
    }
    out
}

fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut summaries = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let cell = records[i].cell;
        let mut scores = Vec::new();
        while i < records.len() && records[i].cell.index == cell.index {
            scores.push(records[i].report.combined);
            i += 1;
        }
        scores.sort_by(|a, b| a.total_cmp(b));
        summaries.push(CellSummary {
            cell,
            trials: scores.len(),
            h_q1: metrics::quantile_sorted(&scores, 0.25),
            h_median: metrics::quantile_sorted(&scores, 0.5),
            h_q3: metrics::quantile_sorted(&scores, 0.75),
        });
    }
    summaries
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::parse_sweep;

    fn small_spec(dir: &std::path::Path) -> SweepSpec {
        let text = format!(
            "\
regime = fully_connected
filter_mode = none
p = 0
tau = 50
b = 0.95
b_hat_flawed = 0.55
f = 0.55
base_seed = 3
output_dir = {}
trials = 3
k_max = 120
",
            dir.display()
        );
        parse_sweep(&text).unwrap()
    }

    #[test]
    fn one_cell_three_trials_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec(&dir.path().join("out"));
        let outcome = run_sweep(&spec, false, Some(2)).unwrap();
        assert_eq!(outcome.records.len(), 3);
        let results = fs::read_to_string(&outcome.results_path).unwrap();
        let lines: Vec<&str> = results.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(outcome.summaries.len(), 1);
        assert_eq!(outcome.summaries[0].trials, 3);
    }

    #[test]
    fn rerun_is_byte_identical_and_order_independent() {
        let dir = tempfile::tempdir().unwrap();
        let spec_a = small_spec(&dir.path().join("a"));
        let spec_b = small_spec(&dir.path().join("b"));
        let a = run_sweep(&spec_a, false, Some(1)).unwrap();
        let b = run_sweep(&spec_b, false, Some(4)).unwrap();
        let bytes_a = fs::read(&a.results_path).unwrap();
        let bytes_b = fs::read(&b.results_path).unwrap();
        assert_eq!(bytes_a, bytes_b);
        let stats_a = fs::read(&a.robot_stats_path).unwrap();
        let stats_b = fs::read(&b.robot_stats_path).unwrap();
        assert_eq!(stats_a, stats_b);
    }

    #[test]
    fn quartile_summary_reference() {
        // H values [50, 60, 70] -> Q1 55, median 60, Q3 65.
        let sorted = [50.0, 60.0, 70.0];
        assert_eq!(metrics::quantile_sorted(&sorted, 0.25), 55.0);
        assert_eq!(metrics::quantile_sorted(&sorted, 0.5), 60.0);
        assert_eq!(metrics::quantile_sorted(&sorted, 0.75), 65.0);
    }

    #[test]
    fn sweep_covers_both_regimes() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "\
regime = fully_connected, dynamic
filter_mode = only_flawed
p = 50
tau = 30
b = 0.95
b_hat_flawed = 0.55
f = 0.55
base_seed = 9
output_dir = {}
trials = 2
k_max = 80
",
            dir.path().join("both").display()
        );
        let spec = parse_sweep(&text).unwrap();
        let outcome = run_sweep(&spec, false, Some(2)).unwrap();
        assert_eq!(outcome.records.len(), 4);
        let results = fs::read_to_string(&outcome.results_path).unwrap();
        assert_eq!(results.matches("fully_connected,").count(), 2);
        assert_eq!(results.matches("dynamic,").count(), 2);
        // Dynamic cells run 20 robots; the stats file carries all of them.
        let stats = fs::read_to_string(&outcome.robot_stats_path).unwrap();
        assert_eq!(stats.lines().count(), 1 + 2 * 10 + 2 * 20);
    }

    #[test]
    fn fully_filtered_sweep_writes_headers_only() {
        // b_hat_flawed equal to b with p > 0: every cell is skipped.
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "\
regime = fully_connected
filter_mode = none
p = 50
tau = 30
b = 0.95
b_hat_flawed = 0.95
f = 0.55
base_seed = 9
output_dir = {}
trials = 2
k_max = 80
",
            dir.path().join("empty").display()
        );
        let spec = parse_sweep(&text).unwrap();
        let outcome = run_sweep(&spec, false, Some(1)).unwrap();
        assert!(outcome.records.is_empty());
        assert!(outcome.summaries.is_empty());
        let results = fs::read_to_string(&outcome.results_path).unwrap();
        assert_eq!(results.trim_end(), RESULTS_HEADER);
    }

    #[test]
    fn dumped_logs_land_per_trial() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec(&dir.path().join("logs_run"));
        let outcome = run_sweep(&spec, true, Some(2)).unwrap();
        let logs_dir = spec.output_dir.join("logs");
        for record in &outcome.records {
            let name = format!("cell{:04}_trial{:03}.csv", record.cell.index, record.trial);
            let loaded = logfile::read_trial_log(&logs_dir.join(name)).unwrap();
            assert_eq!(loaded.len(), record.cell.robot_count());
            assert_eq!(loaded[0].informed.len(), spec.k_max);
        }
    }
}
