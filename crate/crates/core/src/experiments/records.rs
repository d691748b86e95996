use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentError};

/// Outcome of one optimizer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    /// Hit the outer-iteration cap; metrics are those of the last iterate.
    MaxOuter,
    Infeasible,
    Failed,
}

impl RunStatus {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxOuter => "max_outer",
            Self::Infeasible => "infeasible",
            Self::Failed => "failed",
        }
    }

    pub fn has_metrics(self) -> bool {
        matches!(self, Self::Converged | Self::MaxOuter)
    }
}

/// One (sweep value, scheme, policy, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sweep_value: f64,
    pub scheme: String,
    pub policy: String,
    pub seed: u64,
    pub crb_angle_db: Vec<f64>,
    pub crb_coeff_db: Vec<f64>,
    pub crb_trace_db: f64,
    pub min_rate: f64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub status: RunStatus,
}

/// Median over seeds of the runs that produced metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub scheme: String,
    pub policy: String,
    pub n_ok: usize,
    pub crb_angle_db: Vec<f64>,
    pub crb_trace_db: f64,
    pub min_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_tx: usize,
    pub scheme: String,
    pub policy: String,
    pub seed: u64,
    pub iteration: usize,
    pub crb_phi1_db: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeampatternRow {
    pub policy: String,
    /// `common`, `private_<m>` (1-based) or `combined`.
    pub stream: String,
    pub angle_deg: f64,
    pub gain_db: f64,
    /// 1-based index of the target at this grid angle, if any.
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub suite: String,
    pub cases: usize,
    pub passed: bool,
    /// Worst observed statistic for the suite, formatted.
    pub detail: String,
}

/// Fixed-column rendering for CSV output. Vector cells are `;`-joined.
pub trait Tabular {
    fn header() -> Vec<&'static str>;
    fn cells(&self) -> Vec<String>;
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl Tabular for RunRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "sweep_value", "scheme", "policy", "seed", "crb_angle_db", "crb_coeff_db", "crb_trace_db", "min_rate",
            "sum_rate", "iterations", "wall_time_s", "status",
        ]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.sweep_value.to_string(),
            self.scheme.clone(),
            self.policy.clone(),
            self.seed.to_string(),
            join(&self.crb_angle_db),
            join(&self.crb_coeff_db),
            self.crb_trace_db.to_string(),
            self.min_rate.to_string(),
            self.sum_rate.to_string(),
            self.iterations.to_string(),
            self.wall_time_s.to_string(),
            self.status.tag().to_string(),
        ]
    }
}

impl Tabular for SummaryRow {
    fn header() -> Vec<&'static str> {
        vec!["sweep_value", "scheme", "policy", "n_ok", "crb_angle_db", "crb_trace_db", "min_rate"]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.sweep_value.to_string(),
            self.scheme.clone(),
            self.policy.clone(),
            self.n_ok.to_string(),
            join(&self.crb_angle_db),
            self.crb_trace_db.to_string(),
            self.min_rate.to_string(),
        ]
    }
}

impl Tabular for ConvergenceRow {
    fn header() -> Vec<&'static str> {
        vec!["n_tx", "scheme", "policy", "seed", "iteration", "crb_phi1_db", "objective"]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.n_tx.to_string(),
            self.scheme.clone(),
            self.policy.clone(),
            self.seed.to_string(),
            self.iteration.to_string(),
            self.crb_phi1_db.to_string(),
            self.objective.to_string(),
        ]
    }
}

impl Tabular for BeampatternRow {
    fn header() -> Vec<&'static str> {
        vec!["policy", "stream", "angle_deg", "gain_db", "target"]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.policy.clone(),
            self.stream.clone(),
            self.angle_deg.to_string(),
            self.gain_db.to_string(),
            self.target.map(|t| t.to_string()).unwrap_or_default(),
        ]
    }
}

impl Tabular for ValidationRow {
    fn header() -> Vec<&'static str> {
        vec!["suite", "cases", "passed", "detail"]
    }

    fn cells(&self) -> Vec<String> {
        vec![self.suite.clone(), self.cases.to_string(), self.passed.to_string(), self.detail.clone()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format '{other}' (expected csv|json)")),
        }
    }
}

pub fn to_csv<T: Tabular>(rows: &[T]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(T::header())?;
    for r in rows {
        w.write_record(r.cells())?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes `rows` to `<dir>/<stem>.<ext>` and returns the path.
pub fn write_table<T: Tabular + Serialize>(
    dir: &Path,
    stem: &str,
    rows: &[T],
    format: OutputFormat,
) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let body = match format {
        OutputFormat::Csv => to_csv(rows)?,
        OutputFormat::Json => serde_json::to_string_pretty(rows)? + "\n",
    };
    fs::write(&path, body)?;
    Ok(path)
}

/// Provenance of one experiment invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub crate_version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
    pub rows: usize,
    pub failed_runs: usize,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(experiment: &str, cfg: &ExperimentConfig, files: &[PathBuf], rows: usize, failed_runs: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            seeds: cfg.seeds(),
            files: files
                .iter()
                .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
                .collect(),
            rows,
            failed_runs,
            config: cfg.location_free(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, ExperimentError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_manifest.json", self.experiment));
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}
