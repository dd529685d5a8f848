//! Long-format result rows and atomic file emission.
//!
//! Every experiment produces rows under the fixed header
//! `scheme,snr_db,budget_mk,metric,value,stderr,trials`, plus one JSON
//! metadata record (config echo, version, accounting constants, wall time).
//! Files are written to a temporary sibling and renamed into place, so a
//! failed run never leaves a partial output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const CSV_HEADER: &str = "scheme,snr_db,budget_mk,metric,value,stderr,trials";

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub scheme: String,
    pub snr_db: f64,
    pub budget_mk: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl Row {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scheme,
            fmt(self.snr_db),
            fmt(self.budget_mk),
            self.metric,
            fmt(self.value),
            fmt(self.stderr),
            self.trials
        )
    }
}

// Shortest representation that round-trips, so identical runs give
// byte-identical files.
fn fmt(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

#[derive(Serialize)]
pub struct Metadata<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_echo: &'a str,
    pub master_seed: u64,
    pub trials: u64,
    /// Accounting constants: per-iteration multiply-accumulate cost and the
    /// fixed overhead (MK units) per scheme family.
    pub accounting: Accounting,
    pub wall_time_s: f64,
    /// Gain reports of a `gains` run, absent otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_reports: Option<serde_json::Value>,
}

#[derive(Serialize)]
pub struct Accounting {
    pub proposed_cost_per_iter: &'static str,
    pub proposed_overhead_mk: f64,
    pub naive_cost_per_iter: &'static str,
    pub naive_overhead_mk: f64,
    pub herman_cost_per_iter: &'static str,
    pub herman_overhead_mk: f64,
    pub op_unit: &'static str,
}

impl Default for Accounting {
    fn default() -> Self {
        Self {
            proposed_cost_per_iter: "2M",
            proposed_overhead_mk: 2.0,
            naive_cost_per_iter: "2K",
            naive_overhead_mk: 1.0,
            herman_cost_per_iter: "2K+2",
            herman_overhead_mk: 1.0,
            op_unit: "complex multiply-accumulate",
        }
    }
}

fn atomic_write(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp: PathBuf = {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".tmp");
        path.with_file_name(name)
    };
    fs::write(&tmp, contents)
        .map_err(|e| CliError::Config(format!("write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Config(format!("rename to {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    atomic_write(path, &text)
}

pub fn write_json(path: &Path, rows: &[Row], meta: &Metadata) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        meta: &'a Metadata<'a>,
        rows: &'a [Row],
    }
    let text = serde_json::to_string_pretty(&Doc { meta, rows })
        .map_err(|e| CliError::Config(format!("serialize: {e}")))?;
    atomic_write(path, &text)
}

pub fn write_metadata(path: &Path, meta: &Metadata) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(meta)
        .map_err(|e| CliError::Config(format!("serialize: {e}")))?;
    atomic_write(path, &text)
}
