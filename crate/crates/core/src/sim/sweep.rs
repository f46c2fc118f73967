//! One scenario per value of a single config key, run concurrently.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::par::{map_slice, Execution};

use super::config::{override_key, ScenarioConfig};
use super::runner::{run_scenario, write_json, RunSummary};
use super::telemetry::write_csv;
use super::SimError;

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub telemetry: Option<PathBuf>,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
    /// Process exit code this run alone would have produced.
    pub exit_code: i32,
}

/// Splits `1.0,2.0,[1,2,3]` at top-level commas.
pub fn split_values(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    let mut in_str = false;
    for ch in list.chars() {
        match ch {
            '"' => in_str = !in_str,
            '[' if !in_str => depth += 1,
            ']' if !in_str => depth -= 1,
            ',' if depth == 0 && !in_str => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn file_stem(index: usize, key: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{index:03}_{key}={clean}")
}

/// Runs every override; each run writes `<stem>.csv` and `<stem>.json`
/// into `out_dir`, and `sweep.json` lists all entries in input order.
pub fn run_sweep(
    text: &str,
    base: Option<&Path>,
    key: &str,
    values: &[String],
    out_dir: &Path,
    exec: Execution,
) -> Result<Vec<SweepEntry>, SimError> {
    if values.is_empty() {
        return Err(SimError::Usage("--values is empty".into()));
    }
    // Fail fast on a bad key or literal before spawning any run.
    let configs = values
        .iter()
        .map(|v| override_key(text, key, v).and_then(|t| ScenarioConfig::parse(&t, base)))
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::Io { path: out_dir.to_path_buf(), message: e.to_string() })?;

    let jobs: Vec<(usize, &ScenarioConfig)> = configs.iter().enumerate().collect();
    let entries = map_slice(exec, &jobs, |&(i, cfg)| {
        let stem = file_stem(i, key, &values[i]);
        let value = values[i].clone();
        match run_scenario(cfg) {
            Ok(run) => {
                let csv = out_dir.join(format!("{stem}.csv"));
                let written = write_csv(&run.records, &csv).and_then(|_| write_json(&run.summary, &out_dir.join(format!("{stem}.json"))));
                match written {
                    Ok(()) => SweepEntry {
                        value,
                        telemetry: Some(csv),
                        exit_code: if run.summary.constraints_hold() { 0 } else { 2 },
                        summary: Some(run.summary),
                        error: None,
                    },
                    Err(e) => SweepEntry { value, telemetry: None, summary: None, exit_code: e.exit_code(), error: Some(e.to_string()) },
                }
            }
            Err(e) => SweepEntry { value, telemetry: None, summary: None, exit_code: e.exit_code(), error: Some(e.to_string()) },
        }
    });
    write_json(&entries, &out_dir.join("sweep.json"))?;
    Ok(entries)
}
