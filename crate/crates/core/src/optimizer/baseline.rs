//! Multiple-access baselines sharing the same constraint machinery.

use log::info;

use super::algorithm::{optimize, OptimizeOptions};
use super::backend::SolverSettings;
use super::model::PowerPolicy;
use super::solution::Solution;
use super::OptimizerError;
use crate::metrics::MaScheme;
use crate::scenario::{Scenario, SystemConfig};

/// Solves the joint design under `scheme`'s stream structure and `policy`'s sensing split.
///
/// The optimized-split variant starts from the equal-split solution and keeps whichever ends
/// with the lower objective; the equal split is feasible for it, so this only guards against
/// a worse local point.
pub fn solve_baseline(
    scenario: &Scenario,
    cfg: &SystemConfig,
    scheme: MaScheme,
    policy: PowerPolicy,
) -> Result<Solution, OptimizerError> {
    solve_baseline_with(scenario, cfg, &SolverSettings::default(), scheme, policy)
}

pub fn solve_baseline_with(
    scenario: &Scenario,
    cfg: &SystemConfig,
    settings: &SolverSettings,
    scheme: MaScheme,
    policy: PowerPolicy,
) -> Result<Solution, OptimizerError> {
    if scheme != MaScheme::IRsma {
        return optimize(scenario, cfg, settings, &OptimizeOptions::new(scheme, policy));
    }
    let fixed = optimize(scenario, cfg, settings, &OptimizeOptions::new(MaScheme::Rsma, policy))?;
    let mut opts = OptimizeOptions::new(MaScheme::IRsma, policy);
    opts.warm_start = Some(fixed.iterate.clone());
    match optimize(scenario, cfg, settings, &opts) {
        Ok(free) if final_objective(&free) <= final_objective(&fixed) => Ok(free),
        Ok(_) | Err(OptimizerError::MaxOuterIterations(_)) => {
            info!("optimized split did not improve on the equal split; keeping it");
            Ok(Solution { scheme: MaScheme::IRsma, ..fixed })
        }
        Err(e) => Err(e),
    }
}

fn final_objective(s: &Solution) -> f64 {
    s.objective_trace.last().copied().unwrap_or(f64::INFINITY)
}
