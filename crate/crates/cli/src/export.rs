//! Long-format export of a results table for external plotting: one row per
//! trial carrying the requested grouping keys plus `h_K`, `h_e`, `H`.

use anyhow::{Context, Result, bail};
use std::fs;
use std::path::Path;

const SCORE_COLUMNS: [&str; 3] = ["h_K", "h_e", "H"];

/// Reads `results.csv` and renders a table with `by` key columns followed by
/// the three score columns. An empty results table exports as a bare header.
pub fn export_plot_data(results_path: &Path, by: &[String]) -> Result<String> {
    if by.is_empty() {
        bail!("no grouping keys given");
    }
    let text = fs::read_to_string(results_path)
        .with_context(|| format!("reading {}", results_path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .context("results table is empty (missing header)")?;
    let columns: Vec<&str> = header.split(',').collect();

    let mut selected: Vec<usize> = Vec::new();
    for key in by.iter().map(String::as_str).chain(SCORE_COLUMNS) {
        let idx = columns
            .iter()
            .position(|c| *c == key)
            .with_context(|| format!("results table has no column {key:?}"))?;
        selected.push(idx);
    }

    let mut out = String::new();
    out.push_str(&by.join(","));
    out.push(',');
    out.push_str(&SCORE_COLUMNS.join(","));
    out.push('\n');
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            bail!(
                "row {}: expected {} fields, got {}",
                row + 2,
                columns.len(),
                fields.len()
            );
        }
        let picked: Vec<&str> = selected.iter().map(|&i| fields[i]).collect();
        out.push_str(&picked.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::RESULTS_HEADER;

    fn write_results(rows: &[&str]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let mut text = String::from(RESULTS_HEADER);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn rows_carry_requested_keys() {
        let (_dir, path) = write_results(&[
            "dynamic,none,10,1000,0.95,0.55,0.55,0,11,0.55,70.5,88.25,79.375",
            "dynamic,none,30,2000,0.95,0.55,0.55,1,12,0.55,60,80,70",
        ]);
        let out = export_plot_data(&path, &["P".into(), "tau".into()]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "P,tau,h_K,h_e,H");
        assert_eq!(lines[1], "10,1000,70.5,88.25,79.375");
        assert_eq!(lines[2], "30,2000,60,80,70");
    }

    #[test]
    fn empty_results_export_header_only() {
        let (_dir, path) = write_results(&[]);
        let out = export_plot_data(&path, &["f".into()]).unwrap();
        assert_eq!(out, "f,h_K,h_e,H\n");
    }

    #[test]
    fn unknown_key_is_an_error() {
        let (_dir, path) = write_results(&[]);
        let err = export_plot_data(&path, &["speed".into()]).unwrap_err();
        assert!(err.to_string().contains("speed"));
    }
}
