//! Small modeling layer: affine expressions over real scalars, matrix-valued
//! variables given by a real basis, and linear / second-order / exponential / PSD constraints.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use crate::linalg::{c, hermitian_basis, min_eigenvalue_symmetric, outer, CMat, CVec, RMat};

pub type VarId = usize;

/// `Σ coeff·x[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn var(id: VarId) -> Self {
        Self { terms: vec![(id, 1.0)], constant: 0.0 }
    }

    pub fn constant(v: f64) -> Self {
        Self { terms: vec![], constant: v }
    }

    pub fn term(id: VarId, coeff: f64) -> Self {
        Self { terms: vec![(id, coeff)], constant: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }

    pub fn add_term(&mut self, id: VarId, coeff: f64) {
        self.terms.push((id, coeff));
    }

    /// Merge duplicate variables and drop zero coefficients.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (i, a) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => out.push((i, a)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        Self { terms: out, constant: self.constant }
    }

    pub fn max_var(&self) -> Option<VarId> {
        self.terms.iter().map(|t| t.0).max()
    }
}

impl From<f64> for AffineExpr {
    fn from(v: f64) -> Self {
        Self::constant(v)
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Add<f64> for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: f64) -> AffineExpr {
        self.constant += rhs;
        self
    }
}

impl AddAssign for AffineExpr {
    fn add_assign(&mut self, rhs: AffineExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Sub<f64> for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: f64) -> AffineExpr {
        self + (-rhs)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self * -1.0
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(mut self, rhs: f64) -> AffineExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

pub fn sum_exprs<I: IntoIterator<Item = AffineExpr>>(it: I) -> AffineExpr {
    it.into_iter().fold(AffineExpr::default(), |a, b| a + b)
}

/// A Hermitian matrix variable `U = Σ_p x_p·B_p` over a fixed real basis.
#[derive(Debug, Clone)]
pub struct MatrixVar {
    pub name: String,
    pub dim: usize,
    pub offset: VarId,
    pub basis: Arc<Vec<CMat>>,
    /// Full Hermitian parametrization (as opposed to a fixed-direction power variable).
    pub full: bool,
}

impl MatrixVar {
    pub fn n_coords(&self) -> usize {
        self.basis.len()
    }

    pub fn coord(&self, p: usize) -> VarId {
        self.offset + p
    }

    /// `Re Tr(G·U)`.
    pub fn trace_with(&self, g: &CMat) -> AffineExpr {
        let mut e = AffineExpr::default();
        for (p, b) in self.basis.iter().enumerate() {
            let coeff = crate::linalg::re_trace_product(g, b);
            if coeff != 0.0 {
                e.add_term(self.coord(p), coeff);
            }
        }
        e
    }

    pub fn trace(&self) -> AffineExpr {
        self.trace_with(&CMat::identity(self.dim, self.dim))
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (p, b) in self.basis.iter().enumerate() {
            m += b * c(x[self.coord(p)], 0.0);
        }
        m
    }

    /// Entries of the real embedding `[[Re U, −Im U], [Im U, Re U]]`, row-major.
    fn real_embedding_entries(&self) -> Vec<AffineExpr> {
        let n = self.dim;
        let mut out = vec![AffineExpr::default(); 4 * n * n];
        for (p, b) in self.basis.iter().enumerate() {
            let id = self.coord(p);
            for i in 0..n {
                for j in 0..n {
                    let z = b[(i, j)];
                    if z.re != 0.0 {
                        out[i * 2 * n + j].add_term(id, z.re);
                        out[(i + n) * 2 * n + j + n].add_term(id, z.re);
                    }
                    if z.im != 0.0 {
                        out[i * 2 * n + j + n].add_term(id, -z.im);
                        out[(i + n) * 2 * n + j].add_term(id, z.im);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// Objective epigraph `a`.
    Epigraph,
    /// CRB epigraph `v_i`.
    CrbBound,
    /// SINR / interference auxiliaries `c`.
    RateSlack,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sense {
    /// `expr ≥ 0`
    NonNeg,
    /// `expr = 0`
    Zero,
}

#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub label: String,
    pub expr: AffineExpr,
    pub sense: Sense,
}

#[derive(Debug, Clone)]
pub enum ConeConstraint {
    /// `‖tail‖₂ ≤ head`
    Soc { label: String, head: AffineExpr, tail: Vec<AffineExpr> },
    /// `y·exp(x/y) ≤ z`, `y > 0`
    Exp { label: String, x: AffineExpr, y: AffineExpr, z: AffineExpr },
}

/// Symmetric matrix of affine expressions required to be PSD (entries row-major).
#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub label: String,
    pub dim: usize,
    pub entries: Vec<AffineExpr>,
}

impl LmiConstraint {
    pub fn evaluate(&self, x: &[f64]) -> RMat {
        RMat::from_fn(self.dim, self.dim, |i, j| self.entries[i * self.dim + j].eval(x))
    }

    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        min_eigenvalue_symmetric(&self.evaluate(x))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| {
                let a = self.entries[i * self.dim + j].clone().compact();
                let b = self.entries[j * self.dim + i].clone().compact();
                a == b
            })
        })
    }
}

/// One convex conic program: minimize an affine objective subject to the listed constraints.
#[derive(Debug, Clone, Default)]
pub struct ConicSubproblem {
    pub var_names: Vec<String>,
    pub var_roles: Vec<VarRole>,
    pub matrix_vars: Vec<MatrixVar>,
    pub linear_constraints: Vec<LinearConstraint>,
    pub cone_constraints: Vec<ConeConstraint>,
    pub lmi_constraints: Vec<LmiConstraint>,
    pub objective: AffineExpr,
}

impl ConicSubproblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, role: VarRole) -> VarId {
        self.var_names.push(name.into());
        self.var_roles.push(role);
        self.var_names.len() - 1
    }

    /// Full `n×n` Hermitian variable with `n²` real coordinates; optionally constrained PSD.
    pub fn add_hermitian(&mut self, name: &str, n: usize, psd: bool) -> MatrixVar {
        self.add_matrix(name, n, Arc::new(hermitian_basis(n)), true, psd)
    }

    /// Rank-1 variable `U = p·ûûᴴ` with fixed unit direction `û` and power `p ≥ 0`.
    pub fn add_fixed_direction(&mut self, name: &str, dir: &CVec) -> MatrixVar {
        let n = dir.len();
        let norm = dir.norm();
        let unit = if norm > 0.0 { dir / c(norm, 0.0) } else { dir.clone() };
        let v = self.add_matrix(name, n, Arc::new(vec![outer(&unit)]), false, false);
        self.ge(format!("{name}.power>=0"), AffineExpr::var(v.coord(0)));
        v
    }

    fn add_matrix(&mut self, name: &str, n: usize, basis: Arc<Vec<CMat>>, full: bool, psd: bool) -> MatrixVar {
        let offset = self.n_vars();
        for p in 0..basis.len() {
            self.add_scalar(format!("{name}[{p}]"), VarRole::Other);
        }
        let v = MatrixVar { name: name.to_string(), dim: n, offset, basis, full };
        if psd {
            let entries = v.real_embedding_entries();
            self.lmi(format!("{name}>=0"), 2 * n, entries);
        }
        self.matrix_vars.push(v.clone());
        v
    }

    /// `expr ≥ 0`
    pub fn ge(&mut self, label: impl Into<String>, expr: AffineExpr) {
        self.linear_constraints.push(LinearConstraint { label: label.into(), expr: expr.compact(), sense: Sense::NonNeg });
    }

    /// `lhs ≤ rhs`
    pub fn le(&mut self, label: impl Into<String>, lhs: AffineExpr, rhs: AffineExpr) {
        self.ge(label, rhs - lhs);
    }

    /// `expr = 0`
    pub fn eq(&mut self, label: impl Into<String>, expr: AffineExpr) {
        self.linear_constraints.push(LinearConstraint { label: label.into(), expr: expr.compact(), sense: Sense::Zero });
    }

    pub fn soc(&mut self, label: impl Into<String>, head: AffineExpr, tail: Vec<AffineExpr>) {
        self.cone_constraints.push(ConeConstraint::Soc {
            label: label.into(),
            head: head.compact(),
            tail: tail.into_iter().map(AffineExpr::compact).collect(),
        });
    }

    pub fn exp_cone(&mut self, label: impl Into<String>, x: AffineExpr, y: AffineExpr, z: AffineExpr) {
        self.cone_constraints.push(ConeConstraint::Exp {
            label: label.into(),
            x: x.compact(),
            y: y.compact(),
            z: z.compact(),
        });
    }

    pub fn lmi(&mut self, label: impl Into<String>, dim: usize, entries: Vec<AffineExpr>) {
        assert_eq!(entries.len(), dim * dim, "LMI entry count");
        self.lmi_constraints.push(LmiConstraint {
            label: label.into(),
            dim,
            entries: entries.into_iter().map(AffineExpr::compact).collect(),
        });
    }

    pub fn minimize(&mut self, objective: AffineExpr) {
        self.objective = objective.compact();
    }

    pub fn count_role(&self, role: VarRole) -> usize {
        self.var_roles.iter().filter(|&&r| r == role).count()
    }

    /// Scalars of the epigraph form: `a`, every `v_i` and every rate auxiliary `c`.
    pub fn slack_count(&self) -> usize {
        self.count_role(VarRole::Epigraph) + self.count_role(VarRole::CrbBound) + self.count_role(VarRole::RateSlack)
    }

    /// Every expression references a declared variable.
    pub fn references_valid(&self) -> bool {
        let n = self.n_vars();
        let ok = |e: &AffineExpr| e.max_var().is_none_or(|m| m < n);
        self.linear_constraints.iter().all(|c| ok(&c.expr))
            && self.cone_constraints.iter().all(|c| match c {
                ConeConstraint::Soc { head, tail, .. } => ok(head) && tail.iter().all(ok),
                ConeConstraint::Exp { x, y, z, .. } => ok(x) && ok(y) && ok(z),
            })
            && self.lmi_constraints.iter().all(|l| l.entries.iter().all(ok))
            && ok(&self.objective)
    }

    /// Largest violation of any constraint at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.linear_constraints {
            let v = c.expr.eval(x);
            worst = worst.max(match c.sense {
                Sense::NonNeg => -v,
                Sense::Zero => v.abs(),
            });
        }
        for c in &self.cone_constraints {
            worst = worst.max(match c {
                ConeConstraint::Soc { head, tail, .. } => {
                    let t: f64 = tail.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
                    t - head.eval(x)
                }
                ConeConstraint::Exp { x: ex, y, z, .. } => {
                    let (a, b, cz) = (ex.eval(x), y.eval(x), z.eval(x));
                    if b > 0.0 {
                        b * (a / b).exp() - cz
                    } else {
                        f64::INFINITY
                    }
                }
            });
        }
        for l in &self.lmi_constraints {
            worst = worst.max(-l.min_eigenvalue(x));
        }
        worst
    }
}

fn fmt_expr(e: &AffineExpr, names: &[String]) -> String {
    let mut s = String::new();
    for (i, &(id, a)) in e.terms.iter().enumerate() {
        let sign = if a < 0.0 { " - " } else if i > 0 { " + " } else { "" };
        s.push_str(&format!("{sign}{:.6e}*{}", a.abs(), names.get(id).map_or("?", String::as_str)));
    }
    if e.constant != 0.0 || s.is_empty() {
        let sign = if e.constant < 0.0 { " - " } else if s.is_empty() { "" } else { " + " };
        s.push_str(&format!("{sign}{:.6e}", e.constant.abs()));
    }
    s
}

/// Human-readable constraint listing.
impl fmt::Display for ConicSubproblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = &self.var_names;
        writeln!(f, "minimize {}", fmt_expr(&self.objective, n))?;
        writeln!(f, "variables: {} scalars, {} matrix variables", self.n_vars(), self.matrix_vars.len())?;
        for c in &self.linear_constraints {
            let op = if c.sense == Sense::Zero { "==" } else { ">=" };
            writeln!(f, "  [{}] {} {op} 0", c.label, fmt_expr(&c.expr, n))?;
        }
        for c in &self.cone_constraints {
            match c {
                ConeConstraint::Soc { label, head, tail } => {
                    let t: Vec<String> = tail.iter().map(|e| fmt_expr(e, n)).collect();
                    writeln!(f, "  [{label}] ‖({})‖ <= {}", t.join(", "), fmt_expr(head, n))?;
                }
                ConeConstraint::Exp { label, x, y, z } => {
                    writeln!(f, "  [{label}] ({}, {}, {}) in Kexp", fmt_expr(x, n), fmt_expr(y, n), fmt_expr(z, n))?;
                }
            }
        }
        for l in &self.lmi_constraints {
            writeln!(f, "  [{}] {}×{} LMI >= 0", l.label, l.dim, l.dim)?;
        }
        Ok(())
    }
}
