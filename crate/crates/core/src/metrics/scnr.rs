use crate::scenario::TargetSet;

/// `γ_o,k / p₀ = ‖q_t,k‖²·‖q_r,k‖² / σ²`, the per-unit-gain echo SCNR of each target.
pub fn unit_scnr(targets: &TargetSet, noise_power: f64) -> Vec<f64> {
    (0..targets.len())
        .map(|k| {
            targets.steering_tx.column(k).norm_squared() * targets.steering_rx.column(k).norm_squared() / noise_power
        })
        .collect()
}

/// `γ_k = o_k·p₀·Tr(q_r q_tᴴ q_t q_rᴴ)/σ²` with a common mean gain `p₀`.
pub fn echo_scnr(targets: &TargetSet, noise_power: f64, mean_gain: f64) -> Vec<f64> {
    let gains = vec![mean_gain; targets.len()];
    echo_scnr_with_gains(targets, noise_power, &gains)
}

/// Same as [`echo_scnr`] with a separate reflection gain per target.
pub fn echo_scnr_with_gains(targets: &TargetSet, noise_power: f64, gains: &[f64]) -> Vec<f64> {
    unit_scnr(targets, noise_power)
        .into_iter()
        .zip(gains)
        .zip(&targets.power_weights)
        .map(|((u, g), o)| o * g * u)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;

    fn targets(n_tx: usize, n_rx: usize, o: f64) -> TargetSet {
        TargetSet::new(&[0.2], CVec::zeros(1), n_tx, n_rx, 0.5).with_power_weights(&[o])
    }

    #[test]
    fn examples() {
        assert_eq!(echo_scnr(&targets(4, 4, 0.0), 1.0, 1.0), vec![0.0]);
        assert!((echo_scnr(&targets(1, 1, 1.0), 1.0, 1.0)[0] - 1.0).abs() < 1e-12);
        assert!((echo_scnr(&targets(4, 4, 0.5), 1.0, 1.0)[0] - 8.0).abs() < 1e-12);
    }
}
