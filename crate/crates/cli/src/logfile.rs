//! Trial log persistence: long-format CSV with one row per robot per step,
//! columns `robot,step,x,x_hat,b_hat`.

use anyhow::{Context, Result, bail};
use cpsim_core::sim::{RobotTrajectory, TrialLog};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const TRIAL_LOG_HEADER: &str = "robot,step,x,x_hat,b_hat";

pub fn write_trial_log(path: &Path, log: &TrialLog) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{TRIAL_LOG_HEADER}")?;
    for (robot, trajectory) in log.robots.iter().enumerate() {
        for step in 0..trajectory.informed.len() {
            writeln!(
                out,
                "{robot},{step},{},{},{}",
                trajectory.informed[step],
                trajectory.local[step],
                trajectory.assumed_accuracy[step],
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads trajectories back from a trial log file. Rows must be grouped by
/// robot and ordered by step, as written by [`write_trial_log`].
pub fn read_trial_log(path: &Path) -> Result<Vec<RobotTrajectory>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != TRIAL_LOG_HEADER {
        bail!("expected header {TRIAL_LOG_HEADER:?}, got {header:?}");
    }
    let mut robots: Vec<RobotTrajectory> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row = i + 2;
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<&str> {
            fields
                .next()
                .with_context(|| format!("row {row}: missing column {name}"))
        };
        let robot: usize = next("robot")?
            .parse()
            .with_context(|| format!("row {row}: robot"))?;
        let step: usize = next("step")?
            .parse()
            .with_context(|| format!("row {row}: step"))?;
        let x: f64 = next("x")?
            .parse()
            .with_context(|| format!("row {row}: x"))?;
        let x_hat: f64 = next("x_hat")?
            .parse()
            .with_context(|| format!("row {row}: x_hat"))?;
        let b_hat: f64 = next("b_hat")?
            .parse()
            .with_context(|| format!("row {row}: b_hat"))?;
        if robot >= robots.len() {
            if robot != robots.len() {
                bail!("row {row}: robot ids must be contiguous, got {robot}");
            }
            robots.push(RobotTrajectory {
                informed: Vec::new(),
                local: Vec::new(),
                assumed_accuracy: Vec::new(),
            });
        }
        let trajectory = &mut robots[robot];
        if step != trajectory.informed.len() {
            bail!("row {row}: step {step} out of order for robot {robot}");
        }
        trajectory.informed.push(x);
        trajectory.local.push(x_hat);
        trajectory.assumed_accuracy.push(b_hat);
    }
    if robots.is_empty() {
        bail!("trial log {} contains no rows", path.display());
    }
    Ok(robots)
}
