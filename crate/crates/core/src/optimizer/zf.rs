use super::OptimizerError;
use crate::linalg::{c, CMat, CVec};
use crate::metrics::BeamformerSet;
use crate::scenario::Scenario;

/// Zero-forcing private beams and a dominant-direction common beam, each at power `P_max/(M+1)`.
pub fn zero_forcing_init(scenario: &Scenario) -> Result<BeamformerSet, OptimizerError> {
    let m = scenario.users.len();
    let n = scenario.config.n_tx;
    let dirs = zero_forcing_directions(scenario)?;
    let p = scenario.config.p_max / (m as f64 + 1.0);
    let scale = c(p.sqrt(), 0.0);
    let private: Vec<CVec> = dirs.iter().map(|d| d * scale).collect();
    let h = stacked(scenario);
    let svd = h.svd(true, false);
    let idx = svd.singular_values.imax();
    let u = svd.u.expect("left singular vectors requested");
    let common = super::rank1::normalize_phase(u.column(idx).into_owned()) * scale;
    debug_assert_eq!(common.len(), n);
    Ok(BeamformerSet::from_vectors(common, private, vec![0.0; m]))
}

/// `N_t×M` matrix of estimated channels.
fn stacked(scenario: &Scenario) -> CMat {
    let n = scenario.config.n_tx;
    let mut h = CMat::zeros(n, scenario.users.len());
    for (j, u) in scenario.users.iter().enumerate() {
        h.set_column(j, &u.h_est);
    }
    h
}

/// Unit-norm columns of `H (Hᴴ H)⁻¹`.
pub fn zero_forcing_directions(scenario: &Scenario) -> Result<Vec<CVec>, OptimizerError> {
    let m = scenario.users.len();
    let n = scenario.config.n_tx;
    if m > n {
        return Err(OptimizerError::RankDeficientChannels { rank: n, users: m });
    }
    let h = stacked(scenario);
    let gram = h.adjoint() * &h;
    let svals = gram.clone().svd(false, false).singular_values;
    let smax = svals.iter().copied().fold(0.0, f64::max);
    let rank = svals.iter().filter(|&&s| s > 1e-10 * smax.max(f64::MIN_POSITIVE)).count();
    if rank < m {
        return Err(OptimizerError::RankDeficientChannels { rank, users: m });
    }
    let inv = gram.try_inverse().ok_or(OptimizerError::RankDeficientChannels { rank, users: m })?;
    let w = &h * inv;
    Ok((0..m)
        .map(|j| {
            let col = w.column(j).into_owned();
            let nrm = col.norm();
            col / c(nrm, 0.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_scenario, SystemConfig, UserChannel};

    fn scenario(n_tx: usize, m: usize, seed: u64) -> Scenario {
        let mut cfg = SystemConfig::with_dims(n_tx, n_tx, m, 1);
        cfg.rician_weight = 0.3;
        let angles: Vec<f64> = (0..m).map(|i| -1.0 + 0.7 * i as f64).collect();
        build_scenario(&cfg, &angles, &[0.1], seed).unwrap()
    }

    #[test]
    fn single_user_is_matched_filter() {
        let s = scenario(4, 1, 1);
        let bf = zero_forcing_init(&s).unwrap();
        let h = &s.users[0].h_est;
        let u = &bf.u_private[0];
        let cos = u.dotc(h).norm() / (u.norm() * h.norm());
        assert!((cos - 1.0).abs() < 1e-10);
        assert!((u.norm_squared() - s.config.p_max / 2.0).abs() < 1e-6 * s.config.p_max);
    }

    #[test]
    fn orthogonal_users_nulled() {
        let mut s = scenario(3, 2, 2);
        let e = |i: usize| CVec::from_fn(3, |r, _| if r == i { c(1.0, 0.0) } else { c(0.0, 0.0) });
        s.users = vec![UserChannel::new(e(0), 0.0, None), UserChannel::new(e(1), 0.0, None)];
        let bf = zero_forcing_init(&s).unwrap();
        assert!(s.users[0].h_est.dotc(&bf.u_private[1]).norm() < 1e-10);
        assert!(s.users[1].h_est.dotc(&bf.u_private[0]).norm() < 1e-10);
    }

    #[test]
    fn three_random_users_nulled() {
        let s = scenario(4, 3, 3);
        let bf = zero_forcing_init(&s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(s.users[i].h_est.dotc(&bf.u_private[j]).norm() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn too_many_users() {
        let s = scenario(2, 3, 4);
        assert!(matches!(zero_forcing_init(&s), Err(OptimizerError::RankDeficientChannels { .. })));
    }
}
