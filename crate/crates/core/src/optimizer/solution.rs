//! Returned solutions and their independent re-certification.

use serde::{Deserialize, Serialize};

use super::model::{Iterate, PowerPolicy};
use super::scnr_gap;
use super::OptimizerError;
use crate::linalg::trace;
use crate::metrics::{
    crb_from_fim, echo_scnr, fim_blocks, scheme_rates, BeamformerSet, CrbReport, CsiMode, MaScheme, RatesReport,
};
use crate::scenario::{Scenario, SystemConfig};

/// Constraint residuals re-evaluated with [`crate::metrics`]; positive means violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `Tr(R_x) − P_max` (largest per-slot power for OMA).
    pub power_excess: f64,
    /// `I_c − R_c` for schemes with a common stream.
    pub common_rate_deficit: Option<f64>,
    /// `max_m (I_p − R_m)`.
    pub private_rate_deficit: f64,
    /// `Σ r_c,m − R_c`.
    pub split_deficit: Option<f64>,
    /// `R0 − min_m (r_c,m + R_m)`.
    pub rate_floor_deficit: f64,
    /// `max |γ_i − γ_j| − ρ0` under the fairness policy.
    pub fairness_excess: Option<f64>,
    /// Largest rank-1 reconstruction error of the relaxed lifted streams.
    pub rank1_error: f64,
}

impl Certificate {
    /// Largest feasibility violation (rank-1 quality excluded).
    pub fn max_violation(&self) -> f64 {
        [
            self.power_excess,
            self.common_rate_deficit.unwrap_or(f64::NEG_INFINITY),
            self.private_rate_deficit,
            self.split_deficit.unwrap_or(f64::NEG_INFINITY),
            self.rate_floor_deficit,
            self.fairness_excess.unwrap_or(f64::NEG_INFINITY),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64, rank1_tol: f64) -> bool {
        self.max_violation() <= tol && self.rank1_error <= rank1_tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scheme: MaScheme,
    pub power_policy: PowerPolicy,
    /// `(λ₁, λ₂)`.
    pub weights: (f64, f64),
    pub p_max: f64,
    pub bf: BeamformerSet,
    pub power_weights: Vec<f64>,
    pub rates: RatesReport,
    pub crb: CrbReport,
    pub crb_angle_db: Vec<f64>,
    pub crb_trace_db: f64,
    pub scnr: Vec<f64>,
    pub converged: bool,
    pub iterations_outer: usize,
    pub iterations_inner: usize,
    pub objective_trace: Vec<f64>,
    /// Physical CRB of the first target angle after every outer iteration (dB).
    pub crb_angle0_trace_db: Vec<f64>,
    /// Final `(Ξ_c, Ξ_1..Ξ_M)`; `Ξ_c` is unused without a common stream.
    pub penalty_final: (f64, Vec<f64>),
    /// Rank-1 reconstruction error of each relaxed stream at exit.
    pub rank1_errors: Vec<f64>,
    /// `Tr U − λ_max(U)` over `Tr U` of each relaxed stream at exit.
    pub penalty_ratios: Vec<f64>,
    pub certificate: Certificate,
    /// Normalized relaxed iterate at exit, usable as a warm start.
    pub iterate: Iterate,
}

impl Solution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    /// Smallest total user rate `r_c,m + R_m`.
    pub fn min_user_rate(&self) -> f64 {
        let split = &self.bf.rate_split;
        self.rates
            .rate_private
            .iter()
            .enumerate()
            .map(|(m, r)| r + split.get(m).copied().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scnr_gap(&self) -> f64 {
        scnr_gap(&self.scnr)
    }
}

/// Worst-case rates, CRB, SCNRs, and residuals of a physical beamformer set.
pub(crate) struct Evaluation {
    pub rates: RatesReport,
    pub crb: CrbReport,
    pub scnr: Vec<f64>,
    pub certificate: Certificate,
}

pub(crate) fn evaluate(
    scenario: &Scenario,
    cfg: &SystemConfig,
    scheme: MaScheme,
    policy: PowerPolicy,
    bf: &BeamformerSet,
    o: &[f64],
    rank1_error: f64,
) -> Result<Evaluation, OptimizerError> {
    let rates = scheme_rates(scheme, &scenario.users, bf, cfg.noise_power, CsiMode::WorstCase)?;
    let targets = scenario.targets.with_power_weights(o);
    let r_x = scheme.covariance(bf)?;
    let crb = crb_from_fim(&fim_blocks(&targets, &r_x, cfg.n_blocks, cfg.noise_power)?)?;
    let scnr = echo_scnr(&targets, cfg.noise_power, cfg.mean_target_gain);

    let power = match scheme {
        MaScheme::Oma => bf.lifted_private.iter().map(|u| trace(u).re).fold(0.0, f64::max),
        _ => trace(&bf.lifted_common).re + bf.lifted_private.iter().map(|u| trace(u).re).sum::<f64>(),
    };
    let split_total: f64 = bf.rate_split.iter().sum();
    let common = scheme.has_common_stream();
    let floor = rates
        .rate_private
        .iter()
        .enumerate()
        .map(|(m, r)| r + bf.rate_split.get(m).copied().unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min);
    let certificate = Certificate {
        power_excess: power - cfg.p_max,
        common_rate_deficit: common.then(|| cfg.rate_common_min - rates.rate_common),
        private_rate_deficit: rates.rate_private.iter().map(|r| cfg.rate_private_min - r).fold(f64::NEG_INFINITY, f64::max),
        split_deficit: common.then(|| split_total - rates.rate_common),
        rate_floor_deficit: cfg.rate_user_min - floor,
        fairness_excess: (policy == PowerPolicy::FairnessAware).then(|| scnr_gap(&scnr) - cfg.scnr_gap_tol),
        rank1_error,
    };
    Ok(Evaluation { rates, crb, scnr, certificate })
}
