use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::linalg::{outer, CMat, CVec};
use crate::serde_complex;

/// Common and private beamformers in both vector and lifted (`u·uᴴ` or relaxed) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    #[serde(with = "serde_complex::cvec")]
    pub u_common: CVec,
    #[serde(with = "serde_complex::cvec_list")]
    pub u_private: Vec<CVec>,
    #[serde(rename = "U_common", with = "serde_complex::cmat")]
    pub lifted_common: CMat,
    #[serde(rename = "U_private", with = "serde_complex::cmat_list")]
    pub lifted_private: Vec<CMat>,
    pub rate_split: Vec<f64>,
}

impl BeamformerSet {
    /// Rank-1 set from vectors; the lifted matrices are the outer products.
    pub fn from_vectors(u_common: CVec, u_private: Vec<CVec>, rate_split: Vec<f64>) -> Self {
        let lifted_common = outer(&u_common);
        let lifted_private = u_private.iter().map(outer).collect();
        Self { u_common, u_private, lifted_common, lifted_private, rate_split }
    }

    pub fn n_tx(&self) -> usize {
        self.lifted_common.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.lifted_private.len()
    }

    /// Lifted matrices in stream order: common first, then private.
    pub fn lifted_streams(&self) -> Vec<&CMat> {
        std::iter::once(&self.lifted_common).chain(self.lifted_private.iter()).collect()
    }

    pub fn check_dims(&self) -> Result<(), MetricsError> {
        let n = self.lifted_common.nrows();
        let bad = |m: &CMat| m.nrows() != n || m.ncols() != n;
        if self.lifted_common.ncols() != n || self.lifted_private.iter().any(bad) {
            return Err(MetricsError::DimensionMismatch("lifted beamformers must all be N_t×N_t".into()));
        }
        if self.u_common.len() != n || self.u_private.iter().any(|u| u.len() != n) {
            return Err(MetricsError::DimensionMismatch("beam vectors must have length N_t".into()));
        }
        if self.u_private.len() != self.lifted_private.len() || self.rate_split.len() != self.lifted_private.len() {
            return Err(MetricsError::DimensionMismatch("per-user lists must have length M".into()));
        }
        Ok(())
    }
}

/// `U_c + Σ_m U_m`.
pub fn transmit_covariance(bf: &BeamformerSet) -> Result<CMat, MetricsError> {
    bf.check_dims()?;
    let mut r = bf.lifted_common.clone();
    for u in &bf.lifted_private {
        r += u;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_common_beam() {
        let e1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let bf = BeamformerSet::from_vectors(e1, vec![], vec![]);
        let r = transmit_covariance(&bf).unwrap();
        assert_eq!(r[(0, 0)], c(1.0, 0.0));
        assert_eq!(r.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn orthonormal_private_beams() {
        let z = CVec::zeros(3);
        let e = |i: usize| CVec::from_fn(3, |r, _| if r == i { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let bf = BeamformerSet::from_vectors(z, vec![e(0), e(1)], vec![0.0, 0.0]);
        let r = transmit_covariance(&bf).unwrap();
        assert!((trace(&r) - c(2.0, 0.0)).norm() < 1e-15);
        assert!((r[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15 && r[(2, 2)].norm() < 1e-15);
    }

    #[test]
    fn random_rank_one_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = || CVec::from_fn(4, |_, _| crate::scenario::standard_complex_normal(&mut rng));
        let uc = draw();
        let ups = vec![draw(), draw(), draw()];
        let direct = &uc * uc.adjoint() + ups.iter().map(|u| u * u.adjoint()).fold(CMat::zeros(4, 4), |a, b| a + b);
        let bf = BeamformerSet::from_vectors(uc, ups, vec![0.0; 3]);
        assert!((transmit_covariance(&bf).unwrap() - direct).norm() <= 1e-12);
    }

    #[test]
    fn mismatch_detected() {
        let mut bf = BeamformerSet::from_vectors(CVec::zeros(3), vec![CVec::zeros(3)], vec![0.0]);
        bf.lifted_private[0] = CMat::zeros(2, 2);
        assert!(matches!(transmit_covariance(&bf), Err(MetricsError::DimensionMismatch(_))));
    }
}
