//! Seeded desk-scale experiments producing CSV/JSON tables, plus the oracle suites.

mod config;
mod records;
mod runner;
mod validate;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::optimizer::OptimizerError;
use crate::scenario::ScenarioError;

pub use config::{ExperimentConfig, ExperimentKind, SchemeSpec, Sweep, SweepParameter};
pub use records::{
    to_csv, write_table, BeampatternRow, ConvergenceRow, Manifest, OutputFormat, RunRecord, RunStatus, SummaryRow,
    Tabular, ValidationRow,
};
pub use runner::{
    angle_grid_deg, run_beampattern, run_beampattern_experiment, run_convergence, run_csi_sweep, run_grid, run_one,
    run_pareto, run_power_sweep, scenario_for, summarize, worker_count, RunOutcome, SweepResult,
};
pub use validate::{finite_difference_fim, run_validation};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("solution did not converge ({iterations} outer iterations)")]
    NotConverged { iterations: usize },
}

impl ExperimentError {
    /// Whether the failure comes from the problem itself rather than its description.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Self::NotConverged { .. }
                | Self::Optimizer(
                    OptimizerError::Infeasible { .. }
                        | OptimizerError::MaxOuterIterations(_)
                        | OptimizerError::Unbounded
                        | OptimizerError::IterLimit
                        | OptimizerError::Numerical(_)
                )
        )
    }
}
