//! Result records and CSV tables.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use stula_core::reference::fmt_float;
use stula_core::MetricReport;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiments::MomentSummary;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "stula";

/// Everything needed to interpret and re-run an experiment. Wall-clock
/// timings live in a separate file so that records of identical runs are
/// byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'static str,
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub metrics: Vec<MetricReport>,
    pub moments: Option<MomentSummary>,
    pub result: serde_json::Value,
    /// Output files, by name, in the order written.
    pub files: Vec<String>,
}

impl ResultRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            kind: config.kind.as_str(),
            config_hash: config_hash(config),
            config: config.clone(),
            metrics: Vec::new(),
            moments: None,
            result: serde_json::Value::Null,
            files: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    hex(&Sha256::digest(config.canonical_json().as_bytes()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub config_hash: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

/// A CSV cell.
pub enum Cell {
    F(f64),
    U(usize),
    B(bool),
    S(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => fmt_float(*v),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// A table with a fixed header.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    /// RFC 4180: CRLF line ends, quoting only where needed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_file(path, &self.to_bytes())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    File::create(path).and_then(|mut f| f.write_all(bytes)).map_err(io)
}

/// `<prefix><suffix>`.
pub fn sibling(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Column sets of every CSV the runner writes.
pub mod headers {
    pub const SAMPLE_METRICS: &[&str] = &["metric", "value", "estimator", "n_samples", "empty_bins", "std_error"];
    pub const MOMENTS: &[&str] = &["step", "second_moment", "fourth_moment"];
    pub const LAMBDA_SWEEP: &[&str] = &[
        "lambda",
        "n_steps",
        "n_draws",
        "plateau_kl",
        "plateau_tv",
        "empty_bins",
        "kl_last_window",
        "kl_prev_window",
        "plateaued",
        "fitted_rate",
        "horizon_ok",
    ];
    pub const LAMBDA_RATIOS: &[&str] = &["lambda_a", "lambda_b", "kl_ratio", "tv_ratio"];
    pub const BETA_SAMPLING: &[&str] =
        &["beta", "lambda", "n_chains", "rate", "plateau", "points_used", "fit_ok", "final_kl", "final_tv"];
    pub const KL_TRACE: &[&str] = &["beta", "step", "time", "kl", "tv"];
    pub const EXCESS_RISK: &[&str] = &["beta", "lambda", "n_draws", "excess_risk", "std_error", "quadrature"];
    pub const VALIDATE: &[&str] = &["check", "lambda", "holds", "worst_margin", "n_tested", "evidence"];

    /// `beta, n_cells, gap, eig_0 .. eig_{k-1}, converged`.
    pub fn spectrum(k: usize) -> Vec<String> {
        let mut h = vec!["beta".to_string(), "n_cells".into(), "gap".into()];
        h.extend((0..k).map(|i| format!("eig_{i}")));
        h.push("converged".into());
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_crlf_with_17_digits() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![0.1.into(), Cell::Empty, "x,y".into()]);
        let s = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(s, "a,b,c\r\n1.0000000000000001e-1,,\"x,y\"\r\n");
    }

    #[test]
    fn sibling_appends_suffix() {
        assert_eq!(sibling(Path::new("out/run"), ".json"), PathBuf::from("out/run.json"));
    }
}
