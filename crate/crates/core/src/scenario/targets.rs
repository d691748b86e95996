use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::channel::{sample_csi_error, sample_rician_channel, standard_complex_normal, UserChannel};
use super::{ula_steering, ula_steering_derivative, ConfigError, SystemConfig};
use crate::linalg::{CMat, CVec};
use crate::serde_complex;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("target angles {0} and {1} coincide (degenerate FIM)")]
    DuplicateTargetAngle(f64, f64),
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub angles: Vec<f64>,
    #[serde(with = "serde_complex::cvec")]
    pub coeffs: CVec,
    pub power_weights: Vec<f64>,
    #[serde(with = "serde_complex::cmat")]
    pub steering_tx: CMat,
    #[serde(with = "serde_complex::cmat")]
    pub steering_rx: CMat,
    #[serde(with = "serde_complex::cmat")]
    pub steering_tx_deriv: CMat,
    #[serde(with = "serde_complex::cmat")]
    pub steering_rx_deriv: CMat,
}

impl TargetSet {
    pub fn new(angles: &[f64], coeffs: CVec, n_tx: usize, n_rx: usize, spacing: f64) -> Self {
        let k = angles.len();
        let cols = |f: fn(f64, usize, f64) -> CVec, n: usize| {
            let mut m = CMat::zeros(n, k);
            for (j, &a) in angles.iter().enumerate() {
                m.set_column(j, &f(a, n, spacing));
            }
            m
        };
        Self {
            angles: angles.to_vec(),
            coeffs,
            power_weights: vec![1.0 / k as f64; k],
            steering_tx: cols(ula_steering, n_tx),
            steering_rx: cols(ula_steering, n_rx),
            steering_tx_deriv: cols(ula_steering_derivative, n_tx),
            steering_rx_deriv: cols(ula_steering_derivative, n_rx),
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Copy with replaced sensing power weights.
    pub fn with_power_weights(&self, o: &[f64]) -> Self {
        let mut t = self.clone();
        t.power_weights = o.to_vec();
        t
    }

    /// Realized `|p_k|²`.
    pub fn realized_gains(&self) -> Vec<f64> {
        self.coeffs.iter().map(|p| p.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: SystemConfig,
    pub users: Vec<UserChannel>,
    pub targets: TargetSet,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// `K` targets evenly spaced over `[−30°, 30°]` (a single target sits at broadside).
pub fn default_target_angles(k: usize) -> Vec<f64> {
    spread(k, -30.0, 30.0)
}

/// `M` users evenly spread over the 1° grid on `[−60°, 60°]` after removing
/// every grid angle closer than 5° to a target.
pub fn default_user_angles(m: usize, target_angles: &[f64]) -> Vec<f64> {
    let guard = 5f64.to_radians();
    let free: Vec<f64> = (-60..=60)
        .map(|d| (d as f64).to_radians())
        .filter(|a| target_angles.iter().all(|t| (a - t).abs() >= guard))
        .collect();
    if free.is_empty() || m == 0 {
        return vec![0.0; m];
    }
    if m == 1 {
        return vec![free[0]];
    }
    (0..m)
        .map(|i| free[(i * (free.len() - 1) + (m - 1) / 2) / (m - 1)])
        .collect()
}

fn spread(n: usize, lo_deg: f64, hi_deg: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo_deg + hi_deg).to_radians()];
    }
    (0..n)
        .map(|i| (lo_deg + (hi_deg - lo_deg) * i as f64 / (n - 1) as f64).to_radians())
        .collect()
}

/// Samples channels (estimate, bounded error, realization) and target gains from `seed`.
///
/// Draw order is fixed: per user the channel estimate then its error, then one gain per target.
pub fn build_scenario(
    config: &SystemConfig,
    user_angles: &[f64],
    target_angles: &[f64],
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    config.validate()?;
    if user_angles.len() != config.n_users {
        return Err(ScenarioError::CountMismatch { what: "user angles", expected: config.n_users, got: user_angles.len() });
    }
    if target_angles.len() != config.n_targets {
        return Err(ScenarioError::CountMismatch {
            what: "target angles",
            expected: config.n_targets,
            got: target_angles.len(),
        });
    }
    for (i, &a) in target_angles.iter().enumerate() {
        for &b in &target_angles[i + 1..] {
            if (a - b).abs() <= 1e-9 {
                return Err(ScenarioError::DuplicateTargetAngle(a, b));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = user_angles
        .iter()
        .map(|&ang| {
            let h_est = sample_rician_channel(config, ang, &mut rng);
            let err = sample_csi_error(config.csi_error_radius, config.n_tx, &mut rng);
            let h_true = &h_est + err;
            UserChannel::new(h_est, config.csi_error_radius, Some(h_true))
        })
        .collect();
    let p0 = config.mean_target_gain.sqrt();
    let coeffs = CVec::from_fn(config.n_targets, |_, _| standard_complex_normal(&mut rng) * p0);
    let targets = TargetSet::new(target_angles, coeffs, config.n_tx, config.n_rx, config.element_spacing_wavelengths);
    Ok(Scenario { config: config.clone(), users, targets, rng_seed: seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_targets_structure() {
        let cfg = SystemConfig::desk();
        let s = build_scenario(&cfg, &[-1.0, 1.0], &[-0.5, 0.5], 4).unwrap();
        assert_eq!(s.targets.steering_tx.ncols(), 2);
        assert!(s.targets.steering_tx.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!(s.targets.steering_rx.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        for u in &s.users {
            let e = (u.h_true.as_ref().unwrap() - &u.h_est).norm();
            assert!(e <= u.error_radius);
        }
    }

    #[test]
    fn deterministic_serialization() {
        let cfg = SystemConfig::desk();
        let a = build_scenario(&cfg, &[-1.0, 1.0], &[-0.5, 0.5], 11).unwrap();
        let b = build_scenario(&cfg, &[-1.0, 1.0], &[-0.5, 0.5], 11).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back: Scenario = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn duplicate_angles_rejected() {
        let cfg = SystemConfig::desk();
        assert!(matches!(
            build_scenario(&cfg, &[-1.0, 1.0], &[0.3, 0.3], 0),
            Err(ScenarioError::DuplicateTargetAngle(..))
        ));
    }

    #[test]
    fn default_angles_keep_clear_of_targets() {
        let t = default_target_angles(2);
        assert!((t[0].to_degrees() + 30.0).abs() < 1e-9 && (t[1].to_degrees() - 30.0).abs() < 1e-9);
        for m in 1..6 {
            let u = default_user_angles(m, &t);
            assert_eq!(u.len(), m);
            for a in &u {
                assert!(a.to_degrees().abs() <= 60.0 + 1e-9);
                assert!(t.iter().all(|x| (a - x).abs() >= 5f64.to_radians() - 1e-12));
            }
        }
        let u2 = default_user_angles(2, &t);
        assert!((u2[0].to_degrees() + 60.0).abs() < 1e-9 && (u2[1].to_degrees() - 60.0).abs() < 1e-9);
    }
}
