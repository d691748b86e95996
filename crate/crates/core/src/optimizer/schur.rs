use super::conic::{AffineExpr, LmiConstraint};
use super::OptimizerError;

/// Symmetric `d×d` matrix whose entries are affine in the decision variables.
#[derive(Debug, Clone)]
pub struct FimAffine {
    pub dim: usize,
    pub entries: Vec<AffineExpr>,
}

impl FimAffine {
    pub fn entry(&self, i: usize, j: usize) -> &AffineExpr {
        &self.entries[i * self.dim + j]
    }
}

/// `[[F, e_i], [e_iᵀ, v_i]] ⪰ 0` for `i = 1..3K`, each equivalent to `v_i ≥ [F⁻¹]_ii` when `F ≻ 0`.
pub fn build_schur_lmi(fim_affine: &FimAffine, v: &[AffineExpr], k_targets: usize) -> Result<Vec<LmiConstraint>, OptimizerError> {
    build_schur_lmi_scaled(fim_affine, v, k_targets, &vec![1.0; fim_affine.dim])
}

/// Same with `α_i·e_i` in the border, i.e. `v_i ≥ α_i²·[F⁻¹]_ii`.
pub fn build_schur_lmi_scaled(
    fim_affine: &FimAffine,
    v: &[AffineExpr],
    k_targets: usize,
    border: &[f64],
) -> Result<Vec<LmiConstraint>, OptimizerError> {
    let d = fim_affine.dim;
    if d != 3 * k_targets || v.len() != d || border.len() != d || fim_affine.entries.len() != d * d {
        return Err(OptimizerError::DimensionMismatch(format!(
            "Schur LMI: FIM {d}×{d}, {} bounds, K = {k_targets}",
            v.len()
        )));
    }
    let n = d + 1;
    Ok((0..d)
        .map(|i| {
            let mut entries = vec![AffineExpr::default(); n * n];
            for r in 0..d {
                for c in 0..d {
                    entries[r * n + c] = fim_affine.entry(r, c).clone();
                }
            }
            entries[i * n + d] = AffineExpr::constant(border[i]);
            entries[d * n + i] = AffineExpr::constant(border[i]);
            entries[d * n + d] = v[i].clone();
            LmiConstraint { label: format!("schur[{i}]"), dim: n, entries }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;
    use proptest::prelude::*;

    fn constant_fim(f: &RMat) -> FimAffine {
        let d = f.nrows();
        FimAffine { dim: d, entries: (0..d * d).map(|p| AffineExpr::constant(f[(p / d, p % d)])).collect() }
    }

    fn consts(v: &[f64]) -> Vec<AffineExpr> {
        v.iter().map(|&x| AffineExpr::constant(x)).collect()
    }

    #[test]
    fn identity_boundary() {
        let lmis = build_schur_lmi(&constant_fim(&RMat::identity(3, 3)), &consts(&[1.0; 3]), 1).unwrap();
        assert_eq!(lmis.len(), 3);
        for l in &lmis {
            assert_eq!(l.dim, 4);
            assert!(l.min_eigenvalue(&[]).abs() < 1e-12);
        }
        let lmis = build_schur_lmi(&constant_fim(&(RMat::identity(3, 3) * 2.0)), &consts(&[0.5; 3]), 1).unwrap();
        assert!(lmis.iter().all(|l| l.min_eigenvalue(&[]) > -1e-12));
    }

    #[test]
    fn dimension_checked() {
        assert!(build_schur_lmi(&constant_fim(&RMat::identity(3, 3)), &consts(&[1.0; 2]), 1).is_err());
        assert!(build_schur_lmi(&constant_fim(&RMat::identity(3, 3)), &consts(&[1.0; 3]), 2).is_err());
    }

    fn random_pd(seed: &[f64], d: usize) -> RMat {
        let g = RMat::from_fn(d, d, |i, j| seed[(i * d + j) % seed.len()]);
        &g * g.transpose() + RMat::identity(d, d) * 0.5
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn schur_equivalence(seed in proptest::collection::vec(-2.0f64..2.0, 36), k in 1usize..=2, delta in -0.5f64..0.5) {
            let d = 3 * k;
            let f = random_pd(&seed, d);
            let inv = f.clone().try_inverse().unwrap();
            let v: Vec<f64> = (0..d).map(|i| inv[(i, i)] + delta).collect();
            let lmis = build_schur_lmi(&constant_fim(&f), &consts(&v), k).unwrap();
            for (i, l) in lmis.iter().enumerate() {
                let lam = l.min_eigenvalue(&[]);
                if delta > 1e-6 { prop_assert!(lam >= -1e-9, "i={i} λ={lam}"); }
                if delta < -1e-6 { prop_assert!(lam < 0.0, "i={i} λ={lam}"); }
            }
        }
    }

    #[test]
    fn below_bound_violates() {
        let f = random_pd(&[0.3, -1.2, 0.7, 1.9, -0.4, 0.05, 1.1, -0.8, 0.6], 3);
        let inv = f.clone().try_inverse().unwrap();
        let v: Vec<f64> = (0..3).map(|i| inv[(i, i)] - 0.01).collect();
        let lmis = build_schur_lmi(&constant_fim(&f), &consts(&v), 1).unwrap();
        assert!(lmis.iter().all(|l| l.min_eigenvalue(&[]) < 0.0));
    }
}
