//! Rank-one penalty `Tr(U) − u₀ᴴ U u₀` linearized at the previous leading eigenvector.

use super::conic::{AffineExpr, MatrixVar};
use crate::linalg::{c, hermitian_eigen, outer, quad_form, trace, CMat, CVec};

/// `Tr(U) − u₀ᴴ U u₀` for a unit anchor `u₀`.
pub fn penalty_value(u: &CMat, anchor: &CVec) -> f64 {
    trace(u).re - quad_form(anchor, u, anchor).re
}

/// The same quantity as an affine expression of a matrix variable.
pub fn penalty_expr(var: &MatrixVar, anchor: &CVec) -> AffineExpr {
    let n = var.dim;
    let g = CMat::identity(n, n) - outer(anchor);
    var.trace_with(&g)
}

/// Unit leading eigenvector (phase normalized); the first basis vector for a zero matrix.
pub fn leading_unit_vector(u: &CMat) -> CVec {
    let (vals, vecs) = hermitian_eigen(u);
    let n = u.nrows();
    if vals.first().is_none_or(|&l| l <= 0.0) {
        return CVec::from_fn(n, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    }
    super::rank1::normalize_phase(vecs.column(0).into_owned())
}

/// Penalized epigraph `a ≥ λ₁·Σv_i + Σ_s Ξ_s·(Tr U_s − u_sᴴU_s u_s)` expressed as `a − rhs ≥ 0`.
pub fn penalty_objective(
    a: &AffineExpr,
    v: &[AffineExpr],
    streams: &[(&MatrixVar, &CVec, f64)],
    lambda1: f64,
) -> AffineExpr {
    let mut rhs = AffineExpr::default();
    for vi in v {
        rhs += vi.clone() * lambda1;
    }
    for (var, anchor, xi) in streams {
        rhs += penalty_expr(var, anchor) * *xi;
    }
    a.clone() - rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_coords, CVec};
    use crate::optimizer::conic::ConicSubproblem;
    use crate::scenario::standard_complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_at_anchor_vanishes() {
        let u0 = CVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        assert!(penalty_value(&(outer(&u0) * c(3.0, 0.0)), &u0).abs() < 1e-12);
    }

    #[test]
    fn identity_against_basis_vector() {
        let e1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((penalty_value(&CMat::identity(2, 2), &e1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn leading_eigenvector_gives_trace_minus_lambda_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let g = CMat::from_fn(4, 4, |_, _| standard_complex_normal(&mut rng));
            let u = &g * g.adjoint();
            let (vals, _) = hermitian_eigen(&u);
            let anchor = leading_unit_vector(&u);
            let expect = trace(&u).re - vals[0];
            assert!((penalty_value(&u, &anchor) - expect).abs() <= 1e-10 * expect.max(1.0));
            let mut p = ConicSubproblem::new();
            let var = p.add_hermitian("U", 4, false);
            let x = hermitian_coords(&u);
            assert!((penalty_expr(&var, &anchor).eval(&x) - expect).abs() <= 1e-9 * expect.max(1.0));
        }
    }
}
