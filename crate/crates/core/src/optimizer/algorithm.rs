//! Outer penalty/SCA loop, feasibility restoration, and final rank-1 refinement.

use log::{debug, warn};

use super::backend::{solve_conic, SolverSettings};
use super::model::{
    assemble_subproblem, canonical_split, gamma_unit, iterate_rates, initial_power_weights, iterate_covariance, normalized_crb_diag, streams_of, Iterate,
    Phase, PowerPolicy, ScaState, Scaling, StreamKind,
};
use super::penalty::leading_unit_vector;
use super::rank1::extract_rank1;
use super::solution::{evaluate, Solution};
use super::zf::zero_forcing_init;
use super::OptimizerError;
use crate::linalg::{c, hermitian_eigen, outer, quad_form, trace, CMat, CVec};
use crate::metrics::{BeamformerSet, MaScheme};
use crate::scenario::{Scenario, SystemConfig};

/// Total elastic relaxation below which the rate constraints count as satisfied. Each
/// elastic is relative to its square-root anchor, so this stays well inside the rate margin.
const ELASTIC_TOL: f64 = 1e-6;
const MAX_FEASIBILITY_STEPS: usize = 60;
const MAX_POLISH_STEPS: usize = 20;
const RANK1_TOL: f64 = 1e-3;
const PENALTY_RATIO_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub scheme: MaScheme,
    pub policy: PowerPolicy,
    /// Normalized iterate to start from instead of zero forcing.
    pub warm_start: Option<Iterate>,
    pub max_outer: usize,
}

impl OptimizeOptions {
    pub fn new(scheme: MaScheme, policy: PowerPolicy) -> Self {
        Self { scheme, policy, warm_start: None, max_outer: 100 }
    }
}

/// Joint design with an optimized common-rate split and fairness-aware sensing power.
pub fn run_algorithm1(scenario: &Scenario, cfg: &SystemConfig, settings: &SolverSettings) -> Result<Solution, OptimizerError> {
    optimize(scenario, cfg, settings, &OptimizeOptions::new(MaScheme::IRsma, PowerPolicy::FairnessAware))
}

fn check_dims(scenario: &Scenario, cfg: &SystemConfig) -> Result<(), OptimizerError> {
    cfg.validate()?;
    if scenario.targets.is_empty() {
        return Err(OptimizerError::EmptyTargetSet);
    }
    let sc = &scenario.config;
    if (sc.n_tx, sc.n_rx, sc.n_users, sc.n_targets)
        != (cfg.n_tx, cfg.n_rx, scenario.users.len(), scenario.targets.len())
        || cfg.n_users != scenario.users.len()
    {
        return Err(OptimizerError::DimensionMismatch(format!(
            "scenario is {}x{} with {} users / {} targets, config is {}x{} with {} / {}",
            sc.n_tx,
            sc.n_rx,
            scenario.users.len(),
            scenario.targets.len(),
            cfg.n_tx,
            cfg.n_rx,
            cfg.n_users,
            cfg.n_targets
        )));
    }
    Ok(())
}

/// Zero-forcing start in normalized units plus the sensing normalization `Σ CRB` at that start.
fn zf_start(scenario: &Scenario, cfg: &SystemConfig, scheme: MaScheme, policy: PowerPolicy) -> Result<(Iterate, f64), OptimizerError> {
    let bf = zero_forcing_init(scenario)?;
    let scale = c(1.0 / scenario.config.p_max, 0.0);
    let m = scenario.users.len();
    let common = &bf.lifted_common * scale;
    let private: Vec<CMat> = bf.lifted_private.iter().map(|u| u * scale).collect();
    let o = initial_power_weights(policy, &gamma_unit(scenario, cfg));

    let r_ref = private.iter().fold(common.clone(), |acc, u| acc + u);
    let crb_ref = normalized_crb_diag(scenario, cfg, &r_ref)
        .map(|d| d.iter().enumerate().map(|(i, x)| x / o[i % o.len()]).sum::<f64>())
        .filter(|x| x.is_finite() && *x > 0.0)
        .unwrap_or(1.0);

    let k = m as f64;
    let streams = match scheme {
        MaScheme::Rsma | MaScheme::IRsma => std::iter::once(common).chain(private).collect(),
        // Same per-beam power as with a common stream, but the freed share goes to private beams.
        MaScheme::Sdma | MaScheme::Noma => private.iter().map(|u| u * c((k + 1.0) / k, 0.0)).collect(),
        MaScheme::Oma => private.iter().map(|u| u * c(k + 1.0, 0.0)).collect(),
    };
    Ok((Iterate { streams, o, rate_split: vec![0.0; m] }, crb_ref))
}

struct Runner<'a> {
    scenario: &'a Scenario,
    cfg: &'a SystemConfig,
    settings: &'a SolverSettings,
    solves: usize,
}

struct StepResult {
    iterate: Iterate,
    objective: f64,
    elastic: f64,
}

impl Runner<'_> {
    fn step(&mut self, state: &mut ScaState) -> Result<StepResult, OptimizerError> {
        let asm = assemble_subproblem(self.scenario, state, self.cfg)?;
        self.solves += 1;
        let sol = solve_conic(&asm.problem, self.settings)?;
        if sol.reduced_accuracy {
            debug!("reduced accuracy solve (violation {:.2e})", sol.max_violation);
        }
        state.anchors = asm.anchors;
        let mut iterate = asm.handles.read_iterate(&sol.x);
        let (rc, rp) = iterate_rates(self.scenario, self.cfg, state.scheme, &iterate);
        iterate.rate_split = canonical_split(state.scheme, rc, &rp);
        let elastic = asm.handles.elastic_total(&sol.x);
        let objective = asm.handles.epigraph.map_or(sol.objective, |a| sol.x[a]);
        Ok(StepResult { iterate, objective, elastic })
    }

    /// Drives the elastic relaxation to zero from the current iterate.
    fn restore_feasibility(&mut self, state: &mut ScaState) -> Result<(), OptimizerError> {
        let saved = state.phase;
        state.phase = Phase::Feasibility;
        let mut history: Vec<f64> = vec![];
        for step in 0..MAX_FEASIBILITY_STEPS {
            let r = match self.step(state) {
                Ok(r) => r,
                // A breakdown while still far from feasible is reported as infeasibility.
                Err(OptimizerError::Numerical(_) | OptimizerError::IterLimit)
                    if history.last().is_some_and(|&e| e > 100.0 * ELASTIC_TOL) =>
                {
                    return Err(OptimizerError::Infeasible { certificate_norm: history[history.len() - 1] });
                }
                Err(e) => return Err(e),
            };
            debug!("feasibility step: elastic {:.3e}", r.elastic);
            state.iterate = r.iterate;
            if r.elastic <= ELASTIC_TOL {
                state.phase = saved;
                return Ok(());
            }
            let stalled = step >= 5 && r.elastic > 0.9 * history[step - 5];
            history.push(r.elastic);
            if stalled && r.elastic > 100.0 * ELASTIC_TOL || step >= 2 && r.elastic >= history[step - 1] * (1.0 - 1e-6) && r.elastic >= history[step - 2] * (1.0 - 1e-6) {
                return Err(OptimizerError::Infeasible { certificate_norm: r.elastic });
            }
        }
        let last = history.last().copied().unwrap_or(f64::INFINITY);
        Err(OptimizerError::Infeasible { certificate_norm: last })
    }
}

fn rel_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-6)
}

/// The four traced quantities of the stagnation test.
fn traces(kinds: &[StreamKind], it: &Iterate) -> [f64; 4] {
    let mut tc = 0.0;
    let mut tp = 0.0;
    for (k, u) in kinds.iter().zip(&it.streams) {
        match k {
            StreamKind::Common => tc += trace(u).re,
            StreamKind::Private(_) => tp += trace(u).re,
        }
    }
    [
        it.rate_split.iter().map(|x| x * x).sum(),
        it.o.iter().map(|x| x * x).sum(),
        tc,
        tp,
    ]
}

/// `(reconstruction error, (Tr U − λ_max)/Tr U)` for every stream.
fn rank1_quality(it: &Iterate) -> Vec<(f64, f64)> {
    it.streams
        .iter()
        .map(|u| {
            let tr = trace(u).re;
            if tr <= 1e-12 {
                return (0.0, 0.0);
            }
            let err = extract_rank1(u).map_or(0.0, |e| e.reconstruction_error);
            let (vals, _) = hermitian_eigen(u);
            (err, (tr - vals[0]).max(0.0) / tr)
        })
        .collect()
}

pub fn optimize(
    scenario: &Scenario,
    cfg: &SystemConfig,
    settings: &SolverSettings,
    opts: &OptimizeOptions,
) -> Result<Solution, OptimizerError> {
    check_dims(scenario, cfg)?;
    let scheme = opts.scheme;
    let kinds = streams_of(scheme, scenario.users.len());
    let (zf, crb_ref) = zf_start(scenario, cfg, scheme, opts.policy)?;
    let start = match &opts.warm_start {
        Some(w) if w.streams.len() == kinds.len() && w.o.len() == scenario.targets.len() => {
            let mut w = w.clone();
            if opts.policy == PowerPolicy::EqualityAware {
                w.o = zf.o.clone();
            }
            w
        }
        _ => zf,
    };
    let mut state = ScaState::new(scheme, opts.policy, start, cfg, crb_ref);
    let mut run = Runner { scenario, cfg, settings, solves: 0 };
    run.restore_feasibility(&mut state)?;
    state.phase = Phase::Main;

    let scaling = Scaling::new(cfg);
    let mut crb_trace = vec![];
    let mut converged = false;
    let mut outer = 0;
    let mut recoveries = 0;
    let mut prev_traces = traces(&kinds, &state.iterate);
    let mut prev_obj = f64::NAN;
    while outer < opts.max_outer {
        outer += 1;
        state.iterate_index = outer;
        state.bf_anchor = state.iterate.streams.iter().map(leading_unit_vector).collect();
        let r = match run.step(&mut state) {
            Ok(r) => r,
            Err(e @ (OptimizerError::Infeasible { .. } | OptimizerError::Numerical(_) | OptimizerError::IterLimit))
                if recoveries < 5 =>
            {
                warn!("main subproblem failed ({e}); restoring feasibility");
                recoveries += 1;
                run.restore_feasibility(&mut state)?;
                prev_obj = f64::NAN;
                continue;
            }
            Err(e) => return Err(e),
        };
        state.iterate = r.iterate;
        state.objective_trace.push(r.objective);
        let r_now = iterate_covariance(scheme, &state.iterate, scenario.users.len());
        if let Some(d) = normalized_crb_diag(scenario, cfg, &r_now) {
            crb_trace.push(10.0 * scaling.crb_physical(d[0] / state.iterate.o[0]).log10());
        }

        let now = traces(&kinds, &state.iterate);
        debug!(
            "deltas {:?} obj {:.2e}",
            now.iter().zip(&prev_traces).map(|(a, b)| format!("{:.1e}", rel_change(*a, *b))).collect::<Vec<_>>(),
            rel_change(r.objective, prev_obj)
        );
        let objective_flat = prev_obj.is_finite() && rel_change(r.objective, prev_obj) < cfg.outer_tol;
        let stagnant = objective_flat && now.iter().zip(&prev_traces).all(|(a, b)| rel_change(*a, *b) < cfg.outer_tol);
        prev_traces = now;
        prev_obj = r.objective;
        let quality = rank1_quality(&state.iterate);
        let rank1_ok = quality.iter().all(|&(e, p)| e <= RANK1_TOL && p <= PENALTY_RATIO_TOL);
        debug!(
            "{} outer {outer}: objective {:.6e}, stagnant {stagnant}, rank-1 {rank1_ok}, Xi {:.3e}",
            scheme, r.objective, state.penalty_common
        );
        if stagnant && rank1_ok {
            converged = true;
            break;
        }
        // A stalled objective with a higher-rank iterate will not become rank one at this Ξ,
        // even while small trace oscillations keep the iterate from counting as stagnant.
        if stagnant || (objective_flat && !rank1_ok) {
            state.grow_penalties(cfg.penalty_growth);
            prev_obj = f64::NAN;
        }
    }

    let quality = rank1_quality(&state.iterate);
    let relaxed = state.iterate.clone();
    let (polished, o, split) = polish(&mut run, &state).unwrap_or_else(|e| {
        warn!("{scheme}: rank-1 refinement failed ({e}); using direct extraction");
        (relaxed.streams.clone(), relaxed.o.clone(), relaxed.rate_split.clone())
    });

    let p = c(cfg.p_max, 0.0);
    let n = cfg.n_tx;
    let vecs: Vec<CVec> = polished
        .iter()
        .map(|u| extract_rank1(&(u * p)).map_or_else(|_| CVec::zeros(n), |e| e.vector))
        .collect();
    let (u_common, u_private) = if scheme.has_common_stream() {
        (vecs[0].clone(), vecs[1..].to_vec())
    } else {
        (CVec::zeros(n), vecs)
    };
    let bf = BeamformerSet::from_vectors(u_common, u_private, split);
    let rank1_error = quality.iter().map(|q| q.0).fold(0.0, f64::max);
    let ev = evaluate(scenario, cfg, scheme, opts.policy, &bf, &o, rank1_error)?;
    let solution = Solution {
        scheme,
        power_policy: opts.policy,
        weights: (cfg.weight_sensing, cfg.weight_comm),
        p_max: cfg.p_max,
        crb_angle_db: ev.crb.angle_db(),
        crb_trace_db: ev.crb.trace_db(),
        bf,
        power_weights: o,
        rates: ev.rates,
        crb: ev.crb,
        scnr: ev.scnr,
        converged,
        iterations_outer: outer,
        iterations_inner: run.solves,
        objective_trace: state.objective_trace.clone(),
        crb_angle0_trace_db: crb_trace,
        penalty_final: (state.penalty_common, state.penalty_private.clone()),
        rank1_errors: quality.iter().map(|q| q.0).collect(),
        penalty_ratios: quality.iter().map(|q| q.1).collect(),
        certificate: ev.certificate,
        iterate: relaxed,
    };
    if converged {
        Ok(solution)
    } else {
        Err(OptimizerError::MaxOuterIterations(Box::new(solution)))
    }
}

/// Re-optimizes stream powers, split, and sensing weights along the leading eigenvectors,
/// so the returned beams are exactly rank one and the constraints are certified on them.
fn polish(run: &mut Runner<'_>, relaxed: &ScaState) -> Result<(Vec<CMat>, Vec<f64>, Vec<f64>), OptimizerError> {
    let mut state = relaxed.clone();
    let dirs: Vec<CVec> = relaxed.iterate.streams.iter().map(leading_unit_vector).collect();
    state.iterate.streams = relaxed
        .iterate
        .streams
        .iter()
        .zip(&dirs)
        .map(|(u, d)| outer(d) * c(quad_form(d, u, d).re.max(0.0), 0.0))
        .collect();
    state.fixed_directions = dirs;
    state.objective_trace.clear();
    run.restore_feasibility(&mut state)?;
    state.phase = Phase::Main;
    let mut prev = f64::NAN;
    for _ in 0..MAX_POLISH_STEPS {
        let r = run.step(&mut state)?;
        state.iterate = r.iterate;
        if prev.is_finite() && rel_change(r.objective, prev) < 1e-6 {
            break;
        }
        prev = r.objective;
    }
    let it = state.iterate;
    Ok((it.streams, it.o, it.rate_split))
}
