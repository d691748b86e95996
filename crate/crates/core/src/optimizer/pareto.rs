//! Weight sweeps between sensing and communication.

use serde::{Deserialize, Serialize};

use super::algorithm::{optimize, OptimizeOptions};
use super::backend::SolverSettings;
use super::solution::Solution;
use super::OptimizerError;
use crate::metrics::MaScheme;
use crate::scenario::{Scenario, SystemConfig};

use super::model::PowerPolicy;

/// One grid point; a failed point keeps its error message (and the last iterate if any).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub lambda1: f64,
    pub solution: Option<Solution>,
    pub error: Option<String>,
}

/// Sweeps `λ₁` over `lambda_grid` (with `λ₂ = 1 − λ₁`), warm-starting each point from the last success.
pub fn pareto_sweep(scenario: &Scenario, cfg: &SystemConfig, lambda_grid: &[f64]) -> Vec<ParetoPoint> {
    pareto_sweep_with(
        scenario,
        cfg,
        &SolverSettings::default(),
        &OptimizeOptions::new(MaScheme::IRsma, PowerPolicy::FairnessAware),
        lambda_grid,
    )
}

pub fn pareto_sweep_with(
    scenario: &Scenario,
    cfg: &SystemConfig,
    settings: &SolverSettings,
    opts: &OptimizeOptions,
    lambda_grid: &[f64],
) -> Vec<ParetoPoint> {
    let mut warm = opts.warm_start.clone();
    let mut out = Vec::with_capacity(lambda_grid.len());
    for &lambda1 in lambda_grid {
        let mut point_cfg = cfg.clone();
        point_cfg.set_weights(lambda1);
        let mut point_opts = opts.clone();
        point_opts.warm_start = warm.clone();
        let point = match optimize(scenario, &point_cfg, settings, &point_opts) {
            Ok(s) => {
                warm = Some(s.iterate.clone());
                ParetoPoint { lambda1, solution: Some(s), error: None }
            }
            Err(OptimizerError::MaxOuterIterations(s)) => {
                let msg = format!("no convergence within {} outer iterations", s.iterations_outer);
                ParetoPoint { lambda1, solution: Some(*s), error: Some(msg) }
            }
            Err(e) => ParetoPoint { lambda1, solution: None, error: Some(e.to_string()) },
        };
        out.push(point);
    }
    out
}
