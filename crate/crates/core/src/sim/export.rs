use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::engine::{TrialResult, TrialStatus};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl ExportFormat {
    /// Picks the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => ExportFormat::Jsonl,
            _ => ExportFormat::Csv,
        }
    }
}

/// One exported row. Time fields are seconds and empty for failed trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub trial: u32,
    pub status: TrialStatus,
    #[serde(rename = "T_m")]
    pub t_m: Option<f64>,
    #[serde(rename = "T_h")]
    pub t_h: Option<f64>,
    #[serde(rename = "T_r")]
    pub t_r: Option<f64>,
    #[serde(rename = "T_c")]
    pub t_c: Option<f64>,
    pub hw_count: u32,
    pub failure_reason: Option<&'static str>,
}

impl From<&TrialResult> for ResultRow {
    fn from(r: &TrialResult) -> Self {
        let ok = r.status == TrialStatus::Success;
        let secs = |t: crate::time::Micros| ok.then(|| t.as_secs_f64());
        ResultRow {
            trial: r.trial,
            status: r.status,
            t_m: secs(r.metrics.t_m),
            t_h: secs(r.metrics.t_h),
            t_r: secs(r.metrics.t_r),
            t_c: secs(r.metrics.t_c),
            hw_count: r.hw_count,
            failure_reason: r.failure.as_ref().map(|f| f.code()),
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: "<export>".into(),
        message: e.to_string(),
    }
}

/// Writes one row per trial.
pub fn export_results<W: Write>(
    results: &[TrialResult],
    format: ExportFormat,
    out: W,
) -> Result<(), SimError> {
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in results {
                w.serialize(ResultRow::from(r)).map_err(io_err)?;
            }
            w.flush().map_err(io_err)
        }
        ExportFormat::Jsonl => {
            let mut out = out;
            for r in results {
                serde_json::to_writer(&mut out, &ResultRow::from(r)).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            out.flush().map_err(io_err)
        }
    }
}
