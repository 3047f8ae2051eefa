use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cpsim::runner::{self, CellSummary};
use cpsim::sweep::{self, filter_mode_name, regime_name};
use cpsim::{export, logfile};
use cpsim_core::arena::{Arena, DEFAULT_TILE_SIDE};
use cpsim_core::metrics::{self, ScoreConstants};
use std::fs;
use std::path::PathBuf;

/// Swarm fill-ratio estimation experiments with adaptive sensor
/// self-calibration.
#[derive(Parser)]
#[command(name = "cpsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a sweep configuration and write CSV results.
    Run {
        /// Sweep configuration file (key = value lines).
        config: PathBuf,
        /// Also write the full per-trial logs under <output_dir>/logs/.
        #[arg(long)]
        dump_logs: bool,
        /// Worker threads (overrides the CPSIM_WORKERS environment
        /// variable; default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-score a stored trial log against a known fill ratio.
    Score {
        /// Trial log CSV written by `run --dump-logs`.
        triallog: PathBuf,
        /// Ground-truth fill ratio.
        #[arg(long = "f")]
        truth: f64,
        /// Settling threshold for the convergence step.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Convergence-score normalization constant.
        #[arg(long = "k-max", default_value_t = 40_000.0)]
        score_k_max: f64,
        /// Accuracy-score normalization constant.
        #[arg(long = "e-max", default_value_t = 0.45)]
        score_e_max: f64,
    },
    /// Generate or inspect tiled arenas.
    Arena {
        #[command(subcommand)]
        command: ArenaCommand,
    },
    /// Export a long-format plot table from a results file.
    Export {
        /// results.csv produced by `run`.
        results: PathBuf,
        /// Comma-separated grouping keys (columns of the results table).
        #[arg(long, value_delimiter = ',', required = true)]
        by: Vec<String>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ArenaCommand {
    /// Generate an arena from a target fill ratio.
    Gen(ArenaGenArgs),
    /// Load an arena from a grid text file.
    Load {
        /// Grid file: lines of 'B'/'W' characters.
        #[arg(long)]
        arena_file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TILE_SIDE)]
        tile_side: f64,
    },
}

#[derive(Args)]
struct ArenaGenArgs {
    /// Tiles per side.
    #[arg(long)]
    arena_tiles: usize,
    /// Target fill ratio in [0, 1].
    #[arg(long)]
    fill_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_TILE_SIDE)]
    tile_side: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the generated grid to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            dump_logs,
            workers,
        } => run_command(config, dump_logs, workers),
        Command::Score {
            triallog,
            truth,
            delta,
            score_k_max,
            score_e_max,
        } => score_command(triallog, truth, delta, score_k_max, score_e_max),
        Command::Arena { command } => arena_command(command),
        Command::Export { results, by, out } => export_command(results, &by, out),
    }
}

fn run_command(config_path: PathBuf, dump_logs: bool, workers: Option<usize>) -> Result<()> {
    let text = fs::read_to_string(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let spec = sweep::parse_sweep(&text)?;
    for warning in spec.quantization_warnings() {
        eprintln!("warning: {warning}");
    }
    let cells = spec.cells();
    println!(
        "{} cells ({} before validity filtering), {} trials each, {} steps per trial",
        cells.len(),
        spec.product_cell_count(),
        spec.trials_per_cell,
        spec.k_max,
    );
    let outcome = runner::run_sweep(&spec, dump_logs, workers)?;
    println!("wrote {}", outcome.results_path.display());
    println!("wrote {}", outcome.robot_stats_path.display());
    println!("wrote {}", outcome.summary_path.display());
    print_summaries(&outcome.summaries);
    Ok(())
}

fn print_summaries(summaries: &[CellSummary]) {
    println!(
        "{:<16} {:<12} {:>4} {:>6} {:>5} {:>13} {:>5} {:>8} {:>8} {:>8}",
        "regime", "filter_mode", "P", "tau", "b", "b_hat_flawed", "f", "H_q1", "H_med", "H_q3"
    );
    for s in summaries {
        println!(
            "{:<16} {:<12} {:>4} {:>6} {:>5} {:>13} {:>5} {:>8.2} {:>8.2} {:>8.2}",
            regime_name(s.cell.regime),
            filter_mode_name(s.cell.filter_mode),
            s.cell.flawed_percent,
            s.cell.tau,
            s.cell.true_accuracy,
            s.cell.assumed_accuracy_flawed,
            s.cell.fill_ratio,
            s.h_q1,
            s.h_median,
            s.h_q3,
        );
    }
}

fn score_command(
    triallog: PathBuf,
    truth: f64,
    delta: f64,
    score_k_max: f64,
    score_e_max: f64,
) -> Result<()> {
    let robots = logfile::read_trial_log(&triallog)?;
    let constants = ScoreConstants {
        delta,
        k_max: score_k_max,
        e_max: score_e_max,
    };
    let report = metrics::score_trajectories(
        robots.iter().map(|r| r.informed.as_slice()),
        truth,
        &constants,
    )?;
    println!("robot,K,e");
    for (robot, (k, e)) in report
        .convergence_steps
        .iter()
        .zip(&report.errors)
        .enumerate()
    {
        println!("{robot},{k},{e}");
    }
    println!("h_K = {}", report.h_k);
    println!("h_e = {}", report.h_e);
    println!("H   = {}", report.combined);
    Ok(())
}

fn arena_command(command: ArenaCommand) -> Result<()> {
    match command {
        ArenaCommand::Gen(args) => {
            let arena =
                Arena::generate(args.arena_tiles, args.fill_ratio, args.tile_side, args.seed)?;
            describe_arena(&arena);
            if let Some(out) = args.out {
                fs::write(&out, arena.to_grid_text())
                    .with_context(|| format!("writing {}", out.display()))?;
                println!("wrote {}", out.display());
            }
        }
        ArenaCommand::Load {
            arena_file,
            tile_side,
        } => {
            let text = fs::read_to_string(&arena_file)
                .with_context(|| format!("reading {}", arena_file.display()))?;
            let arena = Arena::from_grid_text(&text, tile_side)?;
            describe_arena(&arena);
        }
    }
    Ok(())
}

fn describe_arena(arena: &Arena) {
    println!("tiles: {} x {}", arena.width_tiles(), arena.height_tiles());
    println!("tile side: {} m", arena.tile_side());
    println!("extent: {} x {} m", arena.width_m(), arena.height_m());
    println!("black tiles: {}", arena.black_count());
    println!("realized fill ratio: {}", arena.fill_ratio());
}

fn export_command(results: PathBuf, by: &[String], out: Option<PathBuf>) -> Result<()> {
    let table = export::export_plot_data(&results, by)?;
    match out {
        Some(path) => {
            fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}
