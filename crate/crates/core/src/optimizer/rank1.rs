use serde::{Deserialize, Serialize};

use super::OptimizerError;
use crate::linalg::{c, hermitian_eigen, outer, CMat, CVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1Extraction {
    #[serde(with = "crate::serde_complex::cvec")]
    pub vector: CVec,
    /// `‖U − uuᴴ‖_F / ‖U‖_F`.
    pub reconstruction_error: f64,
}

/// Rotates `v` so its first entry of non-negligible magnitude is real and positive.
pub fn normalize_phase(v: CVec) -> CVec {
    let scale = v.norm();
    match v.iter().find(|z| z.norm() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        Some(z) => {
            let ph = z.conj() / z.norm();
            v * ph
        }
        None => v,
    }
}

/// `√λ_max` times the leading eigenvector of a Hermitian PSD matrix.
pub fn extract_rank1(u: &CMat) -> Result<Rank1Extraction, OptimizerError> {
    let norm = u.norm();
    if !(norm > 0.0) {
        return Err(OptimizerError::ZeroMatrix);
    }
    let (vals, vecs) = hermitian_eigen(u);
    let lam = vals[0].max(0.0);
    let v = normalize_phase(vecs.column(0).into_owned()) * c(lam.sqrt(), 0.0);
    let reconstruction_error = (u - outer(&v)).norm() / norm;
    Ok(Rank1Extraction { vector: v, reconstruction_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::standard_complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = CVec::from_fn(4, |_, _| standard_complex_normal(&mut rng));
        let ex = extract_rank1(&outer(&v)).unwrap();
        assert!(ex.reconstruction_error <= 1e-10);
        // equal up to a global phase
        let ph = ex.vector.dotc(&v) / ex.vector.norm_squared();
        assert!((&ex.vector * ph - &v).norm() <= 1e-10 * v.norm());
        assert!(ex.vector[0].im.abs() < 1e-12 && ex.vector[0].re > 0.0);
    }

    #[test]
    fn diagonal_example() {
        let u = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let ex = extract_rank1(&u).unwrap();
        assert!((ex.vector[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-12 && ex.vector[1].norm() < 1e-12);
        assert!((ex.reconstruction_error - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn near_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CVec::from_fn(4, |_, _| standard_complex_normal(&mut rng));
        let mut b = CVec::from_fn(4, |_, _| standard_complex_normal(&mut rng));
        b -= &a * (a.dotc(&b) / a.norm_squared());
        let a = &a / c(a.norm(), 0.0);
        let b = &b / c(b.norm(), 0.0);
        let u = outer(&a) + outer(&b) * c(1e-6, 0.0);
        assert!(extract_rank1(&u).unwrap().reconstruction_error <= 2e-6);
    }

    #[test]
    fn zero_matrix_rejected() {
        assert!(matches!(extract_rank1(&CMat::zeros(3, 3)), Err(OptimizerError::ZeroMatrix)));
    }
}
