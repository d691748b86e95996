use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::dbm_to_linear;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("penalty_private has length {got}, expected n_users = {expected}")]
    PenaltyLength { got: usize, expected: usize },
    #[error("weight_sensing + weight_comm = {sum}, expected 1")]
    WeightSum { sum: f64 },
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// N_t = N_r = 4, M = 2, K = 2.
    Desk,
    /// N_t = N_r = 8, M = 4, K = 2.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            other => Err(format!("unknown profile '{other}' (expected desk|paper)")),
        }
    }
}

/// Every scalar describing one scenario and the optimizer knobs that go with it.
///
/// Powers are linear and normalized so that 0 dBm equals 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_users: usize,
    pub n_targets: usize,
    pub n_blocks: usize,
    pub noise_power: f64,
    pub p_max: f64,
    pub rate_common_min: f64,
    pub rate_private_min: f64,
    /// Floor on every user's total rate `r_c,m + R_m`; 0 leaves it inactive.
    pub rate_user_min: f64,
    pub scnr_gap_tol: f64,
    pub outer_tol: f64,
    pub penalty_growth: f64,
    pub penalty_common: f64,
    pub penalty_private: Vec<f64>,
    pub weight_sensing: f64,
    pub weight_comm: f64,
    pub rician_weight: f64,
    /// Absolute bound on the CSI error norm. The default is `0.1·√N_t`,
    /// i.e. a tenth of the norm of a pure line-of-sight channel.
    pub csi_error_radius: f64,
    pub mean_target_gain: f64,
    /// Metadata only; the model is narrowband and normalized.
    pub carrier_hz: f64,
    /// Metadata only.
    pub bandwidth_hz: f64,
    pub element_spacing_wavelengths: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl SystemConfig {
    pub fn desk() -> Self {
        Self::with_dims(4, 4, 2, 2)
    }

    pub fn paper() -> Self {
        Self::with_dims(8, 8, 4, 2)
    }

    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn with_dims(n_tx: usize, n_rx: usize, n_users: usize, n_targets: usize) -> Self {
        Self {
            n_tx,
            n_rx,
            n_users,
            n_targets,
            n_blocks: 180,
            noise_power: dbm_to_linear(0.0),
            p_max: dbm_to_linear(40.0),
            rate_common_min: 1.0,
            rate_private_min: 1.0,
            rate_user_min: 0.0,
            scnr_gap_tol: 1.0,
            outer_tol: 1e-4,
            penalty_growth: 0.3,
            penalty_common: 0.3,
            penalty_private: vec![0.3; n_users],
            weight_sensing: 1.0,
            weight_comm: 0.0,
            rician_weight: 0.5,
            csi_error_radius: 0.1 * (n_tx as f64).sqrt(),
            mean_target_gain: 1.0,
            carrier_hz: 28e9,
            bandwidth_hz: 80e6,
            element_spacing_wavelengths: 0.5,
        }
    }

    pub fn p_max_dbm(&self) -> f64 {
        10.0 * self.p_max.log10()
    }

    pub fn set_p_max_dbm(&mut self, dbm: f64) {
        self.p_max = dbm_to_linear(dbm);
    }

    /// Sets λ1 and λ2 = 1 − λ1.
    pub fn set_weights(&mut self, lambda1: f64) {
        self.weight_sensing = lambda1;
        self.weight_comm = 1.0 - lambda1;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
            ("n_users", self.n_users),
            ("n_targets", self.n_targets),
            ("n_blocks", self.n_blocks),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(ConfigError::OutOfRange { field, requirement: ">= 1", value: 0.0 });
            }
        }
        let positive = [
            ("noise_power", self.noise_power),
            ("p_max", self.p_max),
            ("outer_tol", self.outer_tol),
            ("penalty_growth", self.penalty_growth),
            ("penalty_common", self.penalty_common),
            ("mean_target_gain", self.mean_target_gain),
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("element_spacing_wavelengths", self.element_spacing_wavelengths),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::OutOfRange { field, requirement: "finite and > 0", value: v });
            }
        }
        let nonneg = [
            ("rate_common_min", self.rate_common_min),
            ("rate_private_min", self.rate_private_min),
            ("rate_user_min", self.rate_user_min),
            ("scnr_gap_tol", self.scnr_gap_tol),
            ("csi_error_radius", self.csi_error_radius),
        ];
        for (field, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::OutOfRange { field, requirement: "finite and >= 0", value: v });
            }
        }
        let unit = [
            ("weight_sensing", self.weight_sensing),
            ("weight_comm", self.weight_comm),
            ("rician_weight", self.rician_weight),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::OutOfRange { field, requirement: "in [0, 1]", value: v });
            }
        }
        if self.penalty_private.len() != self.n_users {
            return Err(ConfigError::PenaltyLength {
                got: self.penalty_private.len(),
                expected: self.n_users,
            });
        }
        if let Some(&bad) = self.penalty_private.iter().find(|&&x| !(x > 0.0)) {
            return Err(ConfigError::OutOfRange { field: "penalty_private", requirement: "> 0", value: bad });
        }
        let sum = self.weight_sensing + self.weight_comm;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::WeightSum { sum });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SystemConfig::desk().validate().unwrap();
        SystemConfig::paper().validate().unwrap();
        assert!((SystemConfig::paper().p_max_dbm() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        let mut c = SystemConfig::desk();
        c.weight_comm = 0.3;
        assert!(matches!(c.validate(), Err(ConfigError::WeightSum { .. })));
        c.set_weights(0.7);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_zero_targets_and_penalty_length() {
        let mut c = SystemConfig::desk();
        c.n_targets = 0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::desk();
        c.penalty_private.pop();
        assert_eq!(c.validate(), Err(ConfigError::PenaltyLength { got: 1, expected: 2 }));
    }

    #[test]
    fn json_roundtrip() {
        let c = SystemConfig::paper();
        let s = serde_json::to_string(&c).unwrap();
        let back: SystemConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
        let partial: SystemConfig = serde_json::from_str(r#"{"p_max": 2.0}"#).unwrap();
        assert_eq!(partial.p_max, 2.0);
        assert_eq!(partial.n_tx, 4);
    }
}
