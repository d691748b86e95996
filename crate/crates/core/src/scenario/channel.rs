use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ula_steering, SystemConfig};
use crate::linalg::{c, CVec, C64};
use crate::serde_complex;

/// One draw from CN(0, 1).
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(s * re, s * im)
}

/// `√ω·a(θ) + √(1−ω)·g`, `g ~ CN(0, I)`.
pub fn sample_rician_channel<R: Rng + ?Sized>(config: &SystemConfig, los_angle: f64, rng: &mut R) -> CVec {
    let n = config.n_tx;
    let w = config.rician_weight.clamp(0.0, 1.0);
    let los = ula_steering(los_angle, n, config.element_spacing_wavelengths);
    let mut h = los * c(w.sqrt(), 0.0);
    if w < 1.0 {
        let a = (1.0 - w).sqrt();
        for z in h.iter_mut() {
            *z += standard_complex_normal(rng) * a;
        }
    }
    h
}

/// Error vector with uniformly distributed direction and norm uniform on `[0, radius]`.
pub fn sample_csi_error<R: Rng + ?Sized>(radius: f64, n_elems: usize, rng: &mut R) -> CVec {
    if radius <= 0.0 {
        return CVec::zeros(n_elems);
    }
    let mut dir = CVec::from_fn(n_elems, |_, _| standard_complex_normal(rng));
    let mut norm = dir.norm();
    while norm == 0.0 {
        dir = CVec::from_fn(n_elems, |_, _| standard_complex_normal(rng));
        norm = dir.norm();
    }
    let r = radius * rng.gen::<f64>();
    let mut e = dir * c(r / norm, 0.0);
    let en = e.norm();
    if en > radius {
        e *= c(radius / en, 0.0);
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    #[serde(with = "serde_complex::cvec")]
    pub h_est: CVec,
    pub error_radius: f64,
    #[serde(default, with = "opt_cvec", skip_serializing_if = "Option::is_none")]
    pub h_true: Option<CVec>,
    pub e_h_max: f64,
}

impl UserChannel {
    pub fn new(h_est: CVec, error_radius: f64, h_true: Option<CVec>) -> Self {
        let e_h_max = error_radius * error_radius + 2.0 * error_radius * h_est.norm();
        Self { h_est, error_radius, h_true, e_h_max }
    }

    /// Channel realization used for nominal evaluation (estimate when no draw exists).
    pub fn realized(&self) -> &CVec {
        self.h_true.as_ref().unwrap_or(&self.h_est)
    }
}

mod opt_cvec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<CVec>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => serde_complex::cvec::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CVec>, D::Error> {
        let raw: Option<Vec<[f64; 2]>> = Option::deserialize(d)?;
        Ok(raw.map(|r| CVec::from_iterator(r.len(), r.into_iter().map(|[a, b]| c(a, b)))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_los_is_steering() {
        let mut cfg = SystemConfig::desk();
        cfg.rician_weight = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample_rician_channel(&cfg, 0.4, &mut rng);
        assert_eq!(h, ula_steering(0.4, 4, 0.5));
    }

    #[test]
    fn pure_nlos_moments() {
        let mut cfg = SystemConfig::desk();
        cfg.rician_weight = 0.0;
        cfg.n_tx = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut sum = [c(0.0, 0.0); 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let h = sample_rician_channel(&cfg, 0.3, &mut rng);
            for i in 0..2 {
                sum[i] += h[i];
                sq[i] += h[i].norm_sqr();
            }
        }
        for i in 0..2 {
            let mean = sum[i] / n as f64;
            assert!(mean.norm() < 0.02, "mean {mean}");
            let var = sq[i] / n as f64 - mean.norm_sqr();
            assert!((var - 1.0).abs() < 0.03, "var {var}");
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let cfg = SystemConfig::desk();
        let a = sample_rician_channel(&cfg, 0.1, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_rician_channel(&cfg, 0.1, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn csi_error_ball_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_csi_error(0.0, 4, &mut rng), CVec::zeros(4));
        let norms: Vec<f64> = (0..10_000).map(|_| sample_csi_error(0.1, 4, &mut rng).norm()).collect();
        assert!(norms.iter().all(|&x| x <= 0.1));
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        assert!((mean - 0.05).abs() <= 0.005, "mean {mean}");
        for _ in 0..100 {
            assert!(sample_csi_error(1.0, 1, &mut rng)[0].norm() <= 1.0);
        }
    }

    #[test]
    fn e_h_max_exact() {
        let h = CVec::from_vec(vec![c(3.0, 0.0), c(0.0, 4.0)]);
        let u = UserChannel::new(h, 0.5, None);
        assert_eq!(u.e_h_max, 0.25 + 2.0 * 0.5 * 5.0);
    }
}
