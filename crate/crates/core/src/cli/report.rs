//! Versioned JSON reports and CSV tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::verify::Verdict;

pub const SCHEMA_VERSION: u32 = 1;

/// Result of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub n_paths: u64,
    /// Seconds; the only field allowed to differ between reruns.
    pub wall_time: f64,
    pub verdict: Verdict,
    pub result: serde_json::Value,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(format!("report serialization: {e}")))
    }

    /// Report JSON without `wall_time`, for reproducibility comparisons.
    pub fn numeric_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
        if let Some(map) = value.as_object_mut() {
            map.remove("wall_time");
        }
        serde_json::to_string_pretty(&value).map_err(|e| Error::Internal(format!("report serialization: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &(self.to_json()? + "\n"))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("{}: cannot write: {e}", path.display())))
}

pub(crate) fn to_value<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| Error::Internal(format!("report serialization: {e}")))
}

/// Writes `rows` as CSV with the given header; cells are formatted with `{}`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = Vec::new();
    let io = |e: std::io::Error| Error::Internal(format!("csv: {e}"));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    std::fs::write(path, out).map_err(|e| Error::Config(format!("{}: cannot write: {e}", path.display())))
}
