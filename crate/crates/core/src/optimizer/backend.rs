//! Interior-point backend for [`ConicSubproblem`] built on Clarabel.

use std::sync::Once;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::conic::{AffineExpr, ConeConstraint, ConicSubproblem, Sense};
use super::OptimizerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub rel_gap_tol: f64,
    pub max_iters: u32,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { feas_tol: 1e-8, rel_gap_tol: 1e-8, max_iters: 200, verbose: false }
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    /// Largest constraint violation re-evaluated on the model.
    pub max_violation: f64,
    /// Solved at reduced accuracy.
    pub reduced_accuracy: bool,
}

// links the system OpenBLAS that also backs the PSD cone kernels
use openblas_src as _;

extern "C" {
    fn openblas_set_num_threads(n: i32);
}

static BLAS_INIT: Once = Once::new();

/// Dense kernels run single-threaded; parallelism comes from independent solves.
fn init_blas() {
    BLAS_INIT.call_once(|| unsafe { openblas_set_num_threads(1) });
}

struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Adds the row `s = expr`, i.e. `A·x + s = b` with `A = −coeffs`, `b = constant`.
    fn push(&mut self, e: &AffineExpr, scale: f64) {
        let r = self.b.len();
        for &(id, a) in &e.terms {
            if a != 0.0 {
                self.i.push(r);
                self.j.push(id);
                self.v.push(-a * scale);
            }
        }
        self.b.push(e.constant * scale);
    }
}

pub fn solve_conic(problem: &ConicSubproblem, settings: &SolverSettings) -> Result<ConicSolution, OptimizerError> {
    if !(settings.feas_tol > 0.0 && settings.rel_gap_tol > 0.0) {
        return Err(OptimizerError::InvalidSettings("tolerances must be positive".into()));
    }
    init_blas();
    let n = problem.n_vars();
    let mut rows = Rows { i: vec![], j: vec![], v: vec![], b: vec![] };
    let mut cones: Vec<SupportedConeT<f64>> = vec![];

    let zeros: Vec<_> = problem.linear_constraints.iter().filter(|c| c.sense == Sense::Zero).collect();
    let nonneg: Vec<_> = problem.linear_constraints.iter().filter(|c| c.sense == Sense::NonNeg).collect();
    if !zeros.is_empty() {
        zeros.iter().for_each(|c| rows.push(&c.expr, 1.0));
        cones.push(SupportedConeT::ZeroConeT(zeros.len()));
    }
    if !nonneg.is_empty() {
        nonneg.iter().for_each(|c| rows.push(&c.expr, 1.0));
        cones.push(SupportedConeT::NonnegativeConeT(nonneg.len()));
    }
    for c in &problem.cone_constraints {
        match c {
            ConeConstraint::Soc { head, tail, .. } => {
                rows.push(head, 1.0);
                tail.iter().for_each(|e| rows.push(e, 1.0));
                cones.push(SupportedConeT::SecondOrderConeT(1 + tail.len()));
            }
            ConeConstraint::Exp { x, y, z, .. } => {
                rows.push(x, 1.0);
                rows.push(y, 1.0);
                rows.push(z, 1.0);
                cones.push(SupportedConeT::ExponentialConeT());
            }
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in &problem.lmi_constraints {
        // Upper triangle, column by column, off-diagonal entries scaled by √2.
        for j in 0..l.dim {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { sqrt2 };
                rows.push(&l.entries[i * l.dim + j], scale);
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(l.dim));
    }
    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let p = CscMatrix::<f64>::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(id, coef) in &problem.objective.terms {
        q[id] += coef;
    }
    let cfg = DefaultSettingsBuilder::default()
        .verbose(settings.verbose)
        .max_iter(settings.max_iters)
        .tol_feas(settings.feas_tol)
        .tol_gap_rel(settings.rel_gap_tol)
        .tol_gap_abs(settings.rel_gap_tol)
        .max_threads(1)
        .build()
        .map_err(|e| OptimizerError::InvalidSettings(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &cones, cfg)
        .map_err(|e| OptimizerError::Numerical(format!("problem setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let finish = |reduced: bool| {
        let x = sol.x.clone();
        let objective = problem.objective.eval(&x);
        Ok(ConicSolution {
            max_violation: problem.max_violation(&x),
            x,
            objective,
            iterations: sol.iterations,
            reduced_accuracy: reduced,
        })
    };
    match sol.status {
        SolverStatus::Solved => finish(false),
        SolverStatus::AlmostSolved => finish(true),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            let norm = sol.z.iter().map(|v| v * v).sum::<f64>().sqrt();
            Err(OptimizerError::Infeasible { certificate_norm: norm })
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Err(OptimizerError::Unbounded),
        SolverStatus::MaxIterations | SolverStatus::MaxTime => Err(OptimizerError::IterLimit),
        other => Err(OptimizerError::Numerical(format!("{other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::conic::VarRole;

    fn v(id: usize) -> AffineExpr {
        AffineExpr::var(id)
    }

    #[test]
    fn linear_epigraph() {
        let mut p = ConicSubproblem::new();
        let a = p.add_scalar("a", VarRole::Epigraph);
        p.ge("a>=3", v(a) - 3.0);
        p.minimize(v(a));
        let s = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert!((s.x[a] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn two_by_two_lmi_boundary() {
        let mut p = ConicSubproblem::new();
        let x = p.add_scalar("x", VarRole::Other);
        p.lmi("lmi", 2, vec![v(x), 1.0.into(), 1.0.into(), v(x)]);
        p.minimize(v(x));
        let s = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert!((s.x[x] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn triangle_ordering_is_respected() {
        // [[x, 0, 1], [0, 2x, 0.1], [1, 0.1, x]] ⪰ 0 ⇒ x = 1 (an ordering mix-up moves the optimum)
        let mut p = ConicSubproblem::new();
        let x = p.add_scalar("x", VarRole::Other);
        let z = || AffineExpr::constant(0.0);
        let e = vec![
            v(x), z(), 1.0.into(),
            z(), v(x) * 2.0, 0.1.into(),
            1.0.into(), 0.1.into(), v(x),
        ];
        p.lmi("lmi", 3, e);
        p.minimize(v(x));
        let s = solve_conic(&p, &SolverSettings::default()).unwrap();
        let m = p.lmi_constraints[0].evaluate(&s.x);
        assert!(crate::linalg::min_eigenvalue_symmetric(&m).abs() < 1e-6);
        let x_opt = s.x[x];
        let check = nalgebra::DMatrix::from_row_slice(3, 3, &[x_opt, 0.0, 1.0, 0.0, 2.0 * x_opt, 0.1, 1.0, 0.1, x_opt]);
        assert!(crate::linalg::min_eigenvalue_symmetric(&check).abs() < 1e-6);
        assert!(x_opt > 1.0);
    }

    #[test]
    fn exponential_cone_convention() {
        // maximize x s.t. exp(x) ≤ 2  ⇒ x = ln 2
        let mut p = ConicSubproblem::new();
        let x = p.add_scalar("x", VarRole::Other);
        p.exp_cone("exp", v(x), 1.0.into(), 2.0.into());
        p.minimize(-v(x));
        let s = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert!((s.x[x] - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn second_order_cone() {
        // minimize t s.t. ‖(3, 4)‖ ≤ t
        let mut p = ConicSubproblem::new();
        let t = p.add_scalar("t", VarRole::Other);
        p.soc("soc", v(t), vec![3.0.into(), 4.0.into()]);
        p.minimize(v(t));
        let s = solve_conic(&p, &SolverSettings::default()).unwrap();
        assert!((s.x[t] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = ConicSubproblem::new();
        let x = p.add_scalar("x", VarRole::Other);
        p.ge("x>=1", v(x) - 1.0);
        p.ge("x<=0", -v(x));
        p.minimize(v(x));
        assert!(matches!(solve_conic(&p, &SolverSettings::default()), Err(OptimizerError::Infeasible { .. })));
        let mut p = ConicSubproblem::new();
        let x = p.add_scalar("x", VarRole::Other);
        p.minimize(v(x));
        assert!(matches!(solve_conic(&p, &SolverSettings::default()), Err(OptimizerError::Unbounded)));
    }
}
