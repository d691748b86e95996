//! Penalty-based successive convex approximation of the joint beamforming problem.

pub mod algorithm;
pub mod backend;
pub mod baseline;
pub mod conic;
pub mod fairness;
pub mod model;
pub mod pareto;
pub mod penalty;
pub mod rank1;
pub mod schur;
pub mod solution;
pub mod taylor;
pub mod zf;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::scenario::{ConfigError, ScenarioError};

pub use algorithm::{optimize, run_algorithm1, OptimizeOptions};
pub use backend::{solve_conic, ConicSolution, SolverSettings};
pub use baseline::{solve_baseline, solve_baseline_with};
pub use conic::{AffineExpr, ConicSubproblem, ConeConstraint, LinearConstraint, LmiConstraint, MatrixVar, VarId, VarRole};
pub use fairness::{fairness_interval, fairness_power_bounds, scnr_gap};
pub use model::{assemble_subproblem, Iterate, Phase, PowerPolicy, ScaState, StreamKind};
pub use pareto::{pareto_sweep, pareto_sweep_with, ParetoPoint};
pub use penalty::{penalty_expr, penalty_objective, penalty_value};
pub use rank1::{extract_rank1, Rank1Extraction};
pub use schur::{build_schur_lmi, build_schur_lmi_scaled, FimAffine};
pub use solution::{Certificate, Solution};
pub use taylor::{linearize_rate_constraint, GeometricMeanTangent, RateConstraintKind};
pub use zf::{zero_forcing_directions, zero_forcing_init};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("subproblem infeasible (certificate norm {certificate_norm:.3e})")]
    Infeasible { certificate_norm: f64 },
    #[error("subproblem unbounded")]
    Unbounded,
    #[error("conic solver hit its iteration limit")]
    IterLimit,
    #[error("conic solver failed: {0}")]
    Numerical(String),
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("no convergence within {} outer iterations", .0.iterations_outer)]
    MaxOuterIterations(Box<Solution>),
    #[error("channel matrix has rank {rank} < {users} users")]
    RankDeficientChannels { rank: usize, users: usize },
    #[error("Taylor anchor must be positive, got ({c1}, {c2})")]
    NonpositiveAnchor { c1: f64, c2: f64 },
    #[error("cannot extract a beam from a zero matrix")]
    ZeroMatrix,
    #[error("target set is empty")]
    EmptyTargetSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl OptimizerError {
    /// The partially converged solution carried by [`OptimizerError::MaxOuterIterations`].
    pub fn into_solution(self) -> Option<Solution> {
        match self {
            Self::MaxOuterIterations(s) => Some(*s),
            _ => None,
        }
    }
}
