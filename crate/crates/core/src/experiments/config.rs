use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::metrics::MaScheme;
use crate::optimizer::PowerPolicy;
use crate::scenario::{default_target_angles, default_user_angles, Profile, SystemConfig};

/// Parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PMaxDbm,
    CsiErrorRadius,
    Lambda1,
    /// Floor `R₀` on every user's total rate.
    RateUserMin,
    NTx,
}

impl SweepParameter {
    pub fn tag(self) -> &'static str {
        match self {
            Self::PMaxDbm => "p_max_dbm",
            Self::CsiErrorRadius => "csi_error_radius",
            Self::Lambda1 => "lambda1",
            Self::RateUserMin => "rate_user_min",
            Self::NTx => "n_tx",
        }
    }

    /// Writes `value` into a copy of `base`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> SystemConfig {
        let mut cfg = base.clone();
        match self {
            Self::PMaxDbm => cfg.set_p_max_dbm(value),
            Self::CsiErrorRadius => cfg.csi_error_radius = value,
            Self::Lambda1 => cfg.set_weights(value),
            Self::RateUserMin => cfg.rate_user_min = value,
            Self::NTx => {
                let n = value.round().max(1.0) as usize;
                // keep the error radius at the same fraction of a line-of-sight channel norm
                cfg.csi_error_radius = base.csi_error_radius * (n as f64 / base.n_tx as f64).sqrt();
                cfg.n_tx = n;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme: MaScheme,
    pub policy: PowerPolicy,
}

impl SchemeSpec {
    pub fn new(scheme: MaScheme, policy: PowerPolicy) -> Self {
        Self { scheme, policy }
    }
}

/// The experiment families exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convergence,
    PowerSweep,
    CsiSweep,
    Pareto,
    Beampattern,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::PowerSweep => "power-sweep",
            Self::CsiSweep => "csi-sweep",
            Self::Pareto => "pareto",
            Self::Beampattern => "beampattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub base: SystemConfig,
    pub sweep: Sweep,
    pub schemes: Vec<SchemeSpec>,
    pub n_seeds: usize,
    pub seed0: u64,
    pub output_dir: PathBuf,
    /// Target angles in degrees; evenly spaced over [−30°, 30°] when absent.
    pub target_angles_deg: Option<Vec<f64>>,
    /// User line-of-sight angles in degrees; spread away from the targets when absent.
    pub user_angles_deg: Option<Vec<f64>>,
    /// Store measured run times. Off by default so reruns are byte-identical.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_kind(ExperimentKind::PowerSweep, Profile::Desk)
    }
}

const ALL_BASELINES: [MaScheme; 5] = [MaScheme::Rsma, MaScheme::IRsma, MaScheme::Sdma, MaScheme::Noma, MaScheme::Oma];

impl ExperimentConfig {
    /// Defaults for one experiment family on one parameter profile.
    pub fn for_kind(kind: ExperimentKind, profile: Profile) -> Self {
        let base = SystemConfig::profile(profile);
        let fair = PowerPolicy::FairnessAware;
        let (sweep, schemes, n_seeds) = match kind {
            ExperimentKind::Convergence => (
                Sweep { parameter: SweepParameter::NTx, values: vec![2.0, 4.0, 8.0] },
                vec![SchemeSpec::new(MaScheme::IRsma, fair)],
                1,
            ),
            ExperimentKind::PowerSweep => (
                Sweep { parameter: SweepParameter::PMaxDbm, values: vec![10.0, 15.0, 20.0, 25.0, 30.0] },
                vec![
                    SchemeSpec::new(MaScheme::Rsma, fair),
                    SchemeSpec::new(MaScheme::Rsma, PowerPolicy::EqualityAware),
                ],
                10,
            ),
            ExperimentKind::CsiSweep => (
                Sweep { parameter: SweepParameter::CsiErrorRadius, values: vec![0.0, 0.075, 0.15, 0.225, 0.3] },
                ALL_BASELINES.iter().map(|&s| SchemeSpec::new(s, fair)).collect(),
                10,
            ),
            ExperimentKind::Pareto => (
                Sweep { parameter: SweepParameter::Lambda1, values: (1..=9).map(|i| i as f64 / 10.0).collect() },
                vec![SchemeSpec::new(MaScheme::IRsma, fair)],
                1,
            ),
            ExperimentKind::Beampattern => (
                Sweep { parameter: SweepParameter::PMaxDbm, values: vec![base.p_max_dbm()] },
                vec![SchemeSpec::new(MaScheme::Rsma, fair), SchemeSpec::new(MaScheme::Rsma, PowerPolicy::EqualityAware)],
                1,
            ),
        };
        Self {
            base,
            sweep,
            schemes,
            n_seeds,
            seed0: 1,
            output_dir: PathBuf::from("out"),
            target_angles_deg: None,
            user_angles_deg: None,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.schemes.is_empty() {
            return bad("scheme list is empty".into());
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be at least 1".into());
        }
        if self.sweep.values.is_empty() {
            return bad(format!("sweep over {} has no values", self.sweep.parameter.tag()));
        }
        if self.sweep.values.windows(2).any(|w| !(w[0] < w[1])) || self.sweep.values.iter().any(|v| !v.is_finite()) {
            return bad(format!("sweep values over {} must be finite and strictly ascending", self.sweep.parameter.tag()));
        }
        for &v in &self.sweep.values {
            let cfg = self.sweep.parameter.apply(&self.base, v);
            cfg.validate().map_err(|e| ExperimentError::Config(format!("{} = {v}: {e}", self.sweep.parameter.tag())))?;
        }
        if let Some(t) = &self.target_angles_deg {
            if t.len() != self.base.n_targets {
                return bad(format!("{} target angles for n_targets = {}", t.len(), self.base.n_targets));
            }
        }
        if let Some(u) = &self.user_angles_deg {
            if u.len() != self.base.n_users {
                return bad(format!("{} user angles for n_users = {}", u.len(), self.base.n_users));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|i| self.seed0 + i).collect()
    }

    /// `(user_angles, target_angles)` in radians.
    pub fn angles(&self) -> (Vec<f64>, Vec<f64>) {
        let targets = match &self.target_angles_deg {
            Some(t) => t.iter().map(|d| d.to_radians()).collect(),
            None => default_target_angles(self.base.n_targets),
        };
        let users = match &self.user_angles_deg {
            Some(u) => u.iter().map(|d| d.to_radians()).collect(),
            None => default_user_angles(self.base.n_users, &targets),
        };
        (users, targets)
    }

    /// The same configuration with the output location cleared, so provenance does not
    /// depend on where results are written.
    pub fn location_free(&self) -> Self {
        Self { output_dir: PathBuf::new(), ..self.clone() }
    }

    /// SHA-256 of the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(&self.location_free()).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in [
            ExperimentKind::Convergence,
            ExperimentKind::PowerSweep,
            ExperimentKind::CsiSweep,
            ExperimentKind::Pareto,
            ExperimentKind::Beampattern,
        ] {
            ExperimentConfig::for_kind(kind, Profile::Desk).validate().unwrap();
        }
    }

    #[test]
    fn rejects_unsorted_and_empty() {
        let mut c = ExperimentConfig::default();
        c.sweep.values = vec![20.0, 10.0];
        assert!(c.validate().is_err());
        c.sweep.values.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.schemes.clear();
        assert!(matches!(c.validate(), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn json_roundtrip_and_partial_files() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let partial: ExperimentConfig = serde_json::from_str(r#"{"n_seeds": 3, "seed0": 7}"#).unwrap();
        assert_eq!(partial.seeds(), vec![7, 8, 9]);
    }

    #[test]
    fn n_tx_sweep_scales_radius() {
        let base = SystemConfig::desk();
        let c = SweepParameter::NTx.apply(&base, 8.0);
        assert_eq!(c.n_tx, 8);
        assert!((c.csi_error_radius - 0.1 * 8f64.sqrt()).abs() < 1e-12);
    }
}
