use serde::{Deserialize, Serialize};

use super::{BeamformerSet, MetricsError};
use crate::linalg::{quad_form, trace, CMat};
use crate::scenario::UserChannel;

/// Which channel the SINRs are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    /// The realized channel `h_true`.
    Nominal,
    /// Signal on `H_es − e·I`, interference on `H_es + e·I`.
    WorstCase,
    /// Signal on `H_es + e·I`, interference on `H_es − e·I`.
    BestCase,
}

/// Multiple-access structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MaScheme {
    /// Rate splitting with the common rate shared equally.
    #[serde(rename = "RSMA")]
    Rsma,
    /// Rate splitting with an optimized common-rate split.
    #[serde(rename = "I_RSMA")]
    IRsma,
    #[serde(rename = "SDMA")]
    Sdma,
    #[serde(rename = "NOMA")]
    Noma,
    #[serde(rename = "OMA")]
    Oma,
}

impl MaScheme {
    pub const ALL: [MaScheme; 5] = [Self::Rsma, Self::IRsma, Self::Sdma, Self::Noma, Self::Oma];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Rsma => "RSMA",
            Self::IRsma => "I_RSMA",
            Self::Sdma => "SDMA",
            Self::Noma => "NOMA",
            Self::Oma => "OMA",
        }
    }

    pub fn has_common_stream(self) -> bool {
        matches!(self, Self::Rsma | Self::IRsma)
    }

    /// Transmit covariance seen by the targets (OMA time-shares its slots).
    pub fn covariance(self, bf: &BeamformerSet) -> Result<CMat, MetricsError> {
        let r = super::transmit_covariance(bf)?;
        Ok(match self {
            Self::Oma => r / crate::linalg::c(bf.n_users().max(1) as f64, 0.0),
            _ => r,
        })
    }
}

impl std::fmt::Display for MaScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for MaScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "RSMA" => Ok(Self::Rsma),
            "I_RSMA" | "IRSMA" => Ok(Self::IRsma),
            "SDMA" => Ok(Self::Sdma),
            "NOMA" => Ok(Self::Noma),
            "OMA" => Ok(Self::Oma),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub sinr_common: Vec<f64>,
    pub sinr_private: Vec<f64>,
    pub rate_common: f64,
    pub rate_private: Vec<f64>,
    pub rate_sum: f64,
    pub worst_case: bool,
}

struct Evaluator<'a> {
    users: &'a [UserChannel],
    mode: CsiMode,
}

impl Evaluator<'_> {
    fn nominal(&self, m: usize, u: &CMat) -> f64 {
        let h = self.users[m].realized();
        quad_form(h, u, h).re
    }

    fn estimated(&self, m: usize, u: &CMat, sign: f64) -> f64 {
        let ch = &self.users[m];
        quad_form(&ch.h_est, u, &ch.h_est).re + sign * ch.e_h_max * trace(u).re
    }

    /// Clamped `Tr(H·U)` for a desired-signal term.
    fn signal(&self, m: usize, u: &CMat) -> f64 {
        let v = match self.mode {
            CsiMode::Nominal => self.nominal(m, u),
            CsiMode::WorstCase => self.estimated(m, u, -1.0),
            CsiMode::BestCase => self.estimated(m, u, 1.0),
        };
        v.max(0.0)
    }

    /// Clamped `Tr(H·U)` for an interference term.
    fn interference(&self, m: usize, u: &CMat) -> f64 {
        let v = match self.mode {
            CsiMode::Nominal => self.nominal(m, u),
            CsiMode::WorstCase => self.estimated(m, u, 1.0),
            CsiMode::BestCase => self.estimated(m, u, -1.0),
        };
        v.max(0.0)
    }
}

fn check(channels: &[UserChannel], bf: &BeamformerSet, noise_power: f64) -> Result<(), MetricsError> {
    bf.check_dims()?;
    if channels.len() != bf.n_users() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{} channels for {} private beams",
            channels.len(),
            bf.n_users()
        )));
    }
    if channels.iter().any(|c| c.h_est.len() != bf.n_tx()) {
        return Err(MetricsError::DimensionMismatch("channel length differs from N_t".into()));
    }
    if !(noise_power > 0.0) {
        return Err(MetricsError::InvalidArgument(format!("noise power {noise_power}")));
    }
    Ok(())
}

/// SINRs and rates of a one-layer rate-splitting transmission; the common rate is
/// the minimum over users so every user can decode the common stream.
pub fn rsma_rates(
    channels: &[UserChannel],
    bf: &BeamformerSet,
    noise_power: f64,
    mode: CsiMode,
) -> Result<RatesReport, MetricsError> {
    check(channels, bf, noise_power)?;
    let ev = Evaluator { users: channels, mode };
    let m_count = channels.len();
    let mut sinr_common = Vec::with_capacity(m_count);
    let mut sinr_private = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let interf: Vec<f64> = bf.lifted_private.iter().map(|u| ev.interference(m, u)).collect();
        let total: f64 = interf.iter().sum();
        sinr_common.push(ev.signal(m, &bf.lifted_common) / (total + noise_power));
        sinr_private.push(ev.signal(m, &bf.lifted_private[m]) / (total - interf[m] + noise_power));
    }
    let rate_common = sinr_common.iter().map(|g| (1.0 + g).log2()).fold(f64::INFINITY, f64::min);
    let rate_common = if rate_common.is_finite() { rate_common } else { 0.0 };
    let rate_private: Vec<f64> = sinr_private.iter().map(|g| (1.0 + g).log2()).collect();
    let rate_sum = rate_common + rate_private.iter().sum::<f64>();
    Ok(RatesReport {
        sinr_common,
        sinr_private,
        rate_common,
        rate_private,
        rate_sum,
        worst_case: mode == CsiMode::WorstCase,
    })
}

/// Successive-cancellation order: users sorted by ascending estimated channel norm.
pub fn noma_order(channels: &[UserChannel]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..channels.len()).collect();
    order.sort_by(|&a, &b| channels[a].h_est.norm().total_cmp(&channels[b].h_est.norm()).then(a.cmp(&b)));
    order
}

/// Rates under the given multiple-access structure. Non-RSMA schemes report a zero common rate.
pub fn scheme_rates(
    scheme: MaScheme,
    channels: &[UserChannel],
    bf: &BeamformerSet,
    noise_power: f64,
    mode: CsiMode,
) -> Result<RatesReport, MetricsError> {
    match scheme {
        MaScheme::Rsma | MaScheme::IRsma | MaScheme::Sdma => rsma_rates(channels, bf, noise_power, mode),
        MaScheme::Noma => {
            check(channels, bf, noise_power)?;
            let ev = Evaluator { users: channels, mode };
            let order = noma_order(channels);
            let m_count = channels.len();
            let mut sinr_private = vec![0.0; m_count];
            for (j, &stream) in order.iter().enumerate() {
                let mut worst = f64::INFINITY;
                for &listener in &order[j..] {
                    let interf: f64 = order[j + 1..].iter().map(|&s| ev.interference(listener, &bf.lifted_private[s])).sum();
                    let g = ev.signal(listener, &bf.lifted_private[stream]) / (interf + noise_power);
                    worst = worst.min(g);
                }
                sinr_private[stream] = worst;
            }
            Ok(finish(vec![0.0; m_count], sinr_private, 1.0, mode))
        }
        MaScheme::Oma => {
            check(channels, bf, noise_power)?;
            let ev = Evaluator { users: channels, mode };
            let m_count = channels.len();
            let sinr_private = (0..m_count).map(|m| ev.signal(m, &bf.lifted_private[m]) / noise_power).collect();
            Ok(finish(vec![0.0; m_count], sinr_private, 1.0 / m_count as f64, mode))
        }
    }
}

fn finish(sinr_common: Vec<f64>, sinr_private: Vec<f64>, time_fraction: f64, mode: CsiMode) -> RatesReport {
    let rate_private: Vec<f64> = sinr_private.iter().map(|g| time_fraction * (1.0 + g).log2()).collect();
    let rate_sum = rate_private.iter().sum();
    RatesReport {
        sinr_common,
        sinr_private,
        rate_common: 0.0,
        rate_private,
        rate_sum,
        worst_case: mode == CsiMode::WorstCase,
    }
}
