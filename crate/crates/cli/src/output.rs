//! File writers. Every table has a fixed header and every record type a fixed
//! field order, so new regimes or estimators never reorder existing columns.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smallbuf::OverflowEstimate;

use crate::error::{CliError, CliResult};

/// One row of `estimates.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub n: u64,
    pub case: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub buffer: f64,
    pub capacity: f64,
    pub speed: Option<f64>,
    pub method: &'static str,
    pub tilt_theta: Option<f64>,
    pub replications: u64,
    pub hits: u64,
    pub effective_sample_size: f64,
    pub probability: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub normalized_log: Option<f64>,
    pub horizon: f64,
    pub tail_budget: f64,
}

impl From<&OverflowEstimate> for EstimateRow {
    fn from(e: &OverflowEstimate) -> Self {
        Self {
            n: e.n,
            case: e.regime.case.name(),
            alpha: e.regime.alpha,
            beta: e.regime.beta,
            buffer: e.regime.buffer,
            capacity: e.regime.capacity,
            speed: e.regime.speed(e.n as f64),
            method: e.method.name(),
            tilt_theta: e.method.tilt_theta(),
            replications: e.replications,
            hits: e.hits,
            effective_sample_size: e.effective_sample_size,
            probability: e.probability,
            std_error: e.std_error,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            normalized_log: e.normalized_log,
            horizon: e.horizon_used,
            tail_budget: e.tail_budget,
        }
    }
}

/// One row of `plot_decay.csv`: normalized log-probabilities against N.
#[derive(Debug, Clone, Serialize)]
pub struct PlotRow {
    pub n: u64,
    pub speed: Option<f64>,
    pub normalized_log: Option<f64>,
    pub normalized_log_ci_low: Option<f64>,
    pub normalized_log_ci_high: Option<f64>,
    /// −(predicted decay).
    pub predicted: Option<f64>,
    /// −(fitted decay + intercept/f(N)): the regression line at this N.
    pub fitted: Option<f64>,
}

/// Output directory handle.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::write(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn csv<R: Serialize>(&self, name: &str, rows: &[R]) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::write(&path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| CliError::write(&path, e))?;
        }
        w.flush().map_err(|e| CliError::write(&path, e))?;
        Ok(path)
    }

    /// Writes a header-only file when there are no rows, so the schema is
    /// visible even for empty results.
    pub fn csv_with_header<R: Serialize>(
        &self,
        name: &str,
        header: &[&str],
        rows: &[R],
    ) -> CliResult<PathBuf> {
        if !rows.is_empty() {
            return self.csv(name, rows);
        }
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::write(&path, e))?;
        w.write_record(header)
            .map_err(|e| CliError::write(&path, e))?;
        w.flush().map_err(|e| CliError::write(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::write(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::write(&path, e))?;
        Ok(path)
    }

    pub fn jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut file = fs::File::create(&path).map_err(|e| CliError::write(&path, e))?;
        for r in records {
            let line = serde_json::to_string(r).map_err(|e| CliError::write(&path, e))?;
            writeln!(file, "{line}").map_err(|e| CliError::write(&path, e))?;
        }
        Ok(path)
    }
}

pub const ESTIMATE_COLUMNS: [&str; 19] = [
    "n",
    "case",
    "alpha",
    "beta",
    "buffer",
    "capacity",
    "speed",
    "method",
    "tilt_theta",
    "replications",
    "hits",
    "effective_sample_size",
    "probability",
    "std_error",
    "ci_low",
    "ci_high",
    "normalized_log",
    "horizon",
    "tail_budget",
];
