use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::config::{ExperimentConfig, SchemeSpec, SweepParameter};
use super::records::{BeampatternRow, ConvergenceRow, RunRecord, RunStatus, SummaryRow};
use super::ExperimentError;
use crate::linalg::{median, trace};
use crate::metrics::{beampattern, MaScheme};
use crate::optimizer::{optimize, solve_baseline_with, OptimizeOptions, OptimizerError, Solution, SolverSettings};
use crate::scenario::{build_scenario, Scenario, SystemConfig};

/// Worker count: `ISAC_THREADS` if set to a positive integer, else the available cores.
pub fn worker_count() -> usize {
    std::env::var("ISAC_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))
}

pub fn scenario_for(cfg: &ExperimentConfig, sys: &SystemConfig, seed: u64) -> Result<Scenario, ExperimentError> {
    let (users, targets) = cfg.angles();
    Ok(build_scenario(sys, &users, &targets, seed)?)
}

/// Result of one solve together with its table row.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub solution: Option<Solution>,
}

fn status_of(result: &Result<Solution, OptimizerError>) -> RunStatus {
    match result {
        Ok(_) => RunStatus::Converged,
        Err(OptimizerError::MaxOuterIterations(_)) => RunStatus::MaxOuter,
        Err(OptimizerError::Infeasible { .. }) => RunStatus::Infeasible,
        Err(_) => RunStatus::Failed,
    }
}

fn record_from(
    sweep_value: f64,
    spec: SchemeSpec,
    seed: u64,
    solution: Option<&Solution>,
    status: RunStatus,
    wall_time_s: f64,
) -> RunRecord {
    match solution {
        Some(s) => RunRecord {
            sweep_value,
            scheme: spec.scheme.tag().into(),
            policy: spec.policy.tag().into(),
            seed,
            crb_angle_db: s.crb_angle_db.clone(),
            crb_coeff_db: s.crb.coeff_db(),
            crb_trace_db: s.crb_trace_db,
            min_rate: s.min_user_rate(),
            sum_rate: s.rates.rate_sum,
            iterations: s.iterations_outer,
            wall_time_s,
            status,
        },
        None => RunRecord {
            sweep_value,
            scheme: spec.scheme.tag().into(),
            policy: spec.policy.tag().into(),
            seed,
            crb_angle_db: vec![],
            crb_coeff_db: vec![],
            crb_trace_db: f64::NAN,
            min_rate: f64::NAN,
            sum_rate: f64::NAN,
            iterations: 0,
            wall_time_s,
            status,
        },
    }
}

/// Solves one scheme on one seed; failures become rows, never errors.
pub fn run_one(cfg: &ExperimentConfig, sys: &SystemConfig, spec: SchemeSpec, seed: u64, sweep_value: f64) -> RunOutcome {
    let started = Instant::now();
    let result = scenario_for(cfg, sys, seed).map_err(|e| OptimizerError::Numerical(e.to_string())).and_then(|scenario| {
        solve_baseline_with(&scenario, sys, &SolverSettings::default(), spec.scheme, spec.policy)
    });
    let wall = if cfg.record_timing { started.elapsed().as_secs_f64() } else { 0.0 };
    finish(sweep_value, spec, seed, result, wall)
}

fn finish(sweep_value: f64, spec: SchemeSpec, seed: u64, result: Result<Solution, OptimizerError>, wall: f64) -> RunOutcome {
    let status = status_of(&result);
    let solution = match result {
        Ok(s) => Some(s),
        Err(OptimizerError::MaxOuterIterations(s)) => {
            warn!("{} {} seed {seed} at {sweep_value}: outer-iteration cap reached", spec.scheme, spec.policy.tag());
            Some(*s)
        }
        Err(e) => {
            warn!("{} {} seed {seed} at {sweep_value}: {e}", spec.scheme, spec.policy.tag());
            None
        }
    };
    RunOutcome { record: record_from(sweep_value, spec, seed, solution.as_ref(), status, wall), solution }
}

/// Runs every (sweep value, scheme, seed) combination in parallel.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>, ExperimentError> {
    cfg.validate()?;
    let jobs: Vec<(f64, SchemeSpec, u64)> = cfg
        .sweep
        .values
        .iter()
        .flat_map(|&v| cfg.schemes.iter().flat_map(move |&s| cfg.seeds().into_iter().map(move |seed| (v, s, seed))))
        .collect();
    info!("{} runs on {} workers", jobs.len(), worker_count());
    let out = pool()?.install(|| {
        jobs.par_iter()
            .map(|&(v, spec, seed)| run_one(cfg, &cfg.sweep.parameter.apply(&cfg.base, v), spec, seed, v))
            .collect()
    });
    Ok(out)
}

/// Medians over seeds per (sweep value, scheme, policy), in input order.
pub fn summarize(cfg: &ExperimentConfig, records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows = vec![];
    for &v in &cfg.sweep.values {
        for spec in &cfg.schemes {
            let ok: Vec<&RunRecord> = records
                .iter()
                .filter(|r| {
                    r.sweep_value == v
                        && r.scheme == spec.scheme.tag()
                        && r.policy == spec.policy.tag()
                        && r.status.has_metrics()
                })
                .collect();
            let k = ok.first().map_or(0, |r| r.crb_angle_db.len());
            rows.push(SummaryRow {
                sweep_value: v,
                scheme: spec.scheme.tag().into(),
                policy: spec.policy.tag().into(),
                n_ok: ok.len(),
                crb_angle_db: (0..k).map(|i| median(&ok.iter().map(|r| r.crb_angle_db[i]).collect::<Vec<_>>())).collect(),
                crb_trace_db: median(&ok.iter().map(|r| r.crb_trace_db).collect::<Vec<_>>()),
                min_rate: median(&ok.iter().map(|r| r.min_rate).collect::<Vec<_>>()),
            });
        }
    }
    rows
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| !r.status.has_metrics()).count()
    }

    pub fn all_infeasible(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.status == RunStatus::Infeasible)
    }
}

fn expect_parameter(cfg: &ExperimentConfig, allowed: &[SweepParameter], experiment: &str) -> Result<(), ExperimentError> {
    if allowed.contains(&cfg.sweep.parameter) {
        Ok(())
    } else {
        let names: Vec<&str> = allowed.iter().map(|p| p.tag()).collect();
        Err(ExperimentError::Config(format!(
            "{experiment} sweeps {}, got {}",
            names.join(" or "),
            cfg.sweep.parameter.tag()
        )))
    }
}

fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    let records: Vec<RunRecord> = run_grid(cfg)?.into_iter().map(|o| o.record).collect();
    let summary = summarize(cfg, &records);
    Ok(SweepResult { records, summary })
}

/// CRB against transmit power.
pub fn run_power_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    expect_parameter(cfg, &[SweepParameter::PMaxDbm], "power-sweep")?;
    sweep(cfg)
}

/// CRB against the CSI error radius.
pub fn run_csi_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    expect_parameter(cfg, &[SweepParameter::CsiErrorRadius], "csi-sweep")?;
    sweep(cfg)
}

/// Frontier over `λ₁` or over the user-rate floor `R₀`.
///
/// Each (scheme, seed) chain walks the sweep in order, warm-starting every point from the
/// previous one; chains run in parallel.
pub fn run_pareto(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    expect_parameter(cfg, &[SweepParameter::Lambda1, SweepParameter::RateUserMin], "pareto")?;
    cfg.validate()?;
    let chains: Vec<(SchemeSpec, u64)> =
        cfg.schemes.iter().flat_map(|&s| cfg.seeds().into_iter().map(move |seed| (s, seed))).collect();
    let per_chain: Vec<Vec<RunRecord>> = pool()?.install(|| {
        chains
            .par_iter()
            .map(|&(spec, seed)| {
                let scenario = match scenario_for(cfg, &cfg.base, seed) {
                    Ok(s) => s,
                    Err(e) => {
                        warn!("seed {seed}: {e}");
                        return cfg
                            .sweep
                            .values
                            .iter()
                            .map(|&v| record_from(v, spec, seed, None, RunStatus::Failed, 0.0))
                            .collect();
                    }
                };
                let mut warm = None;
                cfg.sweep
                    .values
                    .iter()
                    .map(|&v| {
                        let sys = cfg.sweep.parameter.apply(&cfg.base, v);
                        let mut opts = OptimizeOptions::new(spec.scheme, spec.policy);
                        opts.warm_start = warm.clone();
                        let started = Instant::now();
                        let result = optimize(&scenario, &sys, &SolverSettings::default(), &opts);
                        let wall = if cfg.record_timing { started.elapsed().as_secs_f64() } else { 0.0 };
                        let out = finish(v, spec, seed, result, wall);
                        if let Some(s) = &out.solution {
                            warm = Some(s.iterate.clone());
                        }
                        out.record
                    })
                    .collect()
            })
            .collect()
    });
    let mut records: Vec<RunRecord> = per_chain.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then_with(|| a.scheme.cmp(&b.scheme))
            .then_with(|| a.policy.cmp(&b.policy))
            .then_with(|| a.seed.cmp(&b.seed))
    });
    let summary = summarize(cfg, &records);
    Ok(SweepResult { records, summary })
}

/// Per-iteration angle CRB of the first target for each antenna count.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>, ExperimentError> {
    expect_parameter(cfg, &[SweepParameter::NTx], "convergence")?;
    cfg.validate()?;
    if !cfg.schemes.iter().any(|s| s.scheme == MaScheme::IRsma) {
        return Err(ExperimentError::Config("convergence needs I_RSMA in the scheme list".into()));
    }
    let jobs: Vec<(f64, SchemeSpec, u64)> = cfg
        .sweep
        .values
        .iter()
        .flat_map(|&v| cfg.schemes.iter().flat_map(move |&s| cfg.seeds().into_iter().map(move |seed| (v, s, seed))))
        .collect();
    let tables: Vec<Vec<ConvergenceRow>> = pool()?.install(|| {
        jobs.par_iter()
            .map(|&(v, spec, seed)| {
                let sys = cfg.sweep.parameter.apply(&cfg.base, v);
                let solved = scenario_for(cfg, &sys, seed).map_err(|e| OptimizerError::Numerical(e.to_string())).and_then(
                    |scenario| optimize(&scenario, &sys, &SolverSettings::default(), &OptimizeOptions::new(spec.scheme, spec.policy)),
                );
                let s = match solved {
                    Ok(s) => s,
                    Err(OptimizerError::MaxOuterIterations(s)) => *s,
                    Err(e) => {
                        warn!("convergence N_t = {v}, {} seed {seed}: {e}", spec.scheme);
                        return vec![];
                    }
                };
                s.crb_angle0_trace_db
                    .iter()
                    .enumerate()
                    .map(|(i, &crb)| ConvergenceRow {
                        n_tx: sys.n_tx,
                        scheme: spec.scheme.tag().into(),
                        policy: spec.policy.tag().into(),
                        seed,
                        iteration: i + 1,
                        crb_phi1_db: crb,
                        objective: s.objective_trace.get(i).copied().unwrap_or(f64::NAN),
                    })
                    .collect()
            })
            .collect()
    });
    Ok(tables.into_iter().flatten().collect())
}

/// The 1° angle grid used for beampatterns.
pub fn angle_grid_deg() -> Vec<f64> {
    (-90..=90).map(f64::from).collect()
}

/// Beampatterns of every stream and of the combined covariance of a converged solution.
pub fn run_beampattern(
    scenario: &Scenario,
    solution: &Solution,
    angle_grid_deg: &[f64],
) -> Result<Vec<BeampatternRow>, ExperimentError> {
    if !solution.converged {
        return Err(ExperimentError::NotConverged { iterations: solution.iterations_outer });
    }
    let cfg = &scenario.config;
    let grid: Vec<f64> = angle_grid_deg.iter().map(|d| d.to_radians()).collect();
    let targets_deg: Vec<f64> = scenario.targets.angles.iter().map(|a| a.to_degrees()).collect();
    let nearest_target = |deg: f64| {
        let step = angle_grid_deg.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
        let half = if step.is_finite() { 0.5 * step } else { 0.5 };
        targets_deg.iter().position(|t| (t - deg).abs() <= half + 1e-9).map(|i| i + 1)
    };
    let bf = &solution.bf;
    let mut streams: Vec<(String, crate::linalg::CMat)> = vec![];
    if solution.scheme.has_common_stream() && trace(&bf.lifted_common).re > 0.0 {
        streams.push(("common".into(), bf.lifted_common.clone()));
    }
    for (m, u) in bf.lifted_private.iter().enumerate() {
        streams.push((format!("private_{}", m + 1), u.clone()));
    }
    streams.push(("combined".into(), solution.scheme.covariance(bf)?));
    let mut rows = vec![];
    for (name, r) in &streams {
        let bp = beampattern(r, &grid, cfg.n_tx, cfg.element_spacing_wavelengths);
        for (i, &deg) in angle_grid_deg.iter().enumerate() {
            rows.push(BeampatternRow {
                policy: solution.power_policy.tag().into(),
                stream: name.clone(),
                angle_deg: deg,
                gain_db: bp.gain_db[i],
                target: nearest_target(deg),
            });
        }
    }
    Ok(rows)
}

/// Solves every configured scheme on the first seed and concatenates their beampatterns.
pub fn run_beampattern_experiment(cfg: &ExperimentConfig) -> Result<Vec<BeampatternRow>, ExperimentError> {
    cfg.validate()?;
    let v = cfg.sweep.values[0];
    let sys = cfg.sweep.parameter.apply(&cfg.base, v);
    let scenario = scenario_for(cfg, &sys, cfg.seed0)?;
    let solutions: Vec<Result<Solution, OptimizerError>> = pool()?.install(|| {
        cfg.schemes
            .par_iter()
            .map(|spec| solve_baseline_with(&scenario, &sys, &SolverSettings::default(), spec.scheme, spec.policy))
            .collect()
    });
    let grid = angle_grid_deg();
    let mut rows = vec![];
    for s in solutions {
        let s = match s {
            Ok(s) => s,
            Err(OptimizerError::MaxOuterIterations(s)) => {
                return Err(ExperimentError::NotConverged { iterations: s.iterations_outer })
            }
            Err(e) => return Err(e.into()),
        };
        rows.extend(run_beampattern(&scenario, &s, &grid)?);
    }
    Ok(rows)
}
