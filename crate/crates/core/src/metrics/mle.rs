use rand::Rng;

use super::MetricsError;
use crate::linalg::{c, psd_sqrt, CMat, CVec, C64};
use crate::scenario::{standard_complex_normal, ula_steering, Scenario};

const GRID: usize = 721;

/// Per-trial squared errors `[φ, Re p, Im p]` of a grid-refined maximum-likelihood
/// estimator on simulated echoes `Y = Q_r diag(√o·p) Q_tᴴ X + N` with `XXᴴ = T·R`.
pub fn mle_squared_errors<R: Rng + ?Sized>(
    scenario: &Scenario,
    r_x: &CMat,
    n_trials: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, MetricsError> {
    let cfg = &scenario.config;
    let k = scenario.targets.len();
    if n_trials < 100 {
        return Err(MetricsError::InvalidArgument(format!("n_trials = {n_trials}, need at least 100")));
    }
    if k == 0 || k > 2 || cfg.n_tx > 4 || cfg.n_rx > 4 {
        return Err(MetricsError::InstanceTooLarge(format!("K={k}, N_t={}, N_r={}", cfg.n_tx, cfg.n_rx)));
    }
    if cfg.n_blocks < cfg.n_tx {
        return Err(MetricsError::InvalidArgument("n_blocks must be at least n_tx".into()));
    }
    if r_x.nrows() != cfg.n_tx || r_x.ncols() != cfg.n_tx {
        return Err(MetricsError::DimensionMismatch("covariance size differs from N_t".into()));
    }
    let t = cfg.n_blocks;
    // Orthogonal DFT rows give W·Wᴴ = T·I, so X = R^{1/2}·W has X·Xᴴ = T·R.
    let w = CMat::from_fn(cfg.n_tx, t, |n, s| {
        let ph = -2.0 * std::f64::consts::PI * (n * s) as f64 / t as f64;
        c(ph.cos(), ph.sin())
    });
    let x = psd_sqrt(r_x) * w;
    let model = Model::new(scenario, r_x);
    let tg = &scenario.targets;
    let mut clean = CMat::zeros(cfg.n_rx, cfg.n_tx);
    for i in 0..k {
        let g = tg.coeffs[i] * tg.power_weights[i].sqrt();
        clean += tg.steering_rx.column(i) * tg.steering_tx.column(i).adjoint() * g;
    }
    let clean = clean * &x;
    let sigma = cfg.noise_power.sqrt();
    let mut out = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let y = CMat::from_fn(cfg.n_rx, t, |i, j| clean[(i, j)] + standard_complex_normal(rng) * sigma);
        let z = y * x.adjoint();
        let est = model.estimate(&z);
        let mut err = vec![0.0; 3 * k];
        for i in 0..k {
            let p_hat = est.gains[i] / tg.power_weights[i].sqrt();
            err[i] = (est.angles[i] - tg.angles[i]).powi(2);
            err[k + i] = (p_hat.re - tg.coeffs[i].re).powi(2);
            err[2 * k + i] = (p_hat.im - tg.coeffs[i].im).powi(2);
        }
        out.push(err);
    }
    Ok(out)
}

/// Empirical MSE per parameter over `n_trials` independent echoes.
pub fn mle_mse_oracle<R: Rng + ?Sized>(
    scenario: &Scenario,
    r_x: &CMat,
    n_trials: usize,
    rng: &mut R,
) -> Result<Vec<f64>, MetricsError> {
    let errs = mle_squared_errors(scenario, r_x, n_trials, rng)?;
    let dim = errs[0].len();
    Ok((0..dim).map(|i| errs.iter().map(|e| e[i]).sum::<f64>() / errs.len() as f64).collect())
}

struct Estimate {
    angles: Vec<f64>,
    gains: Vec<C64>,
}

struct Model {
    n_tx: usize,
    n_rx: usize,
    spacing: f64,
    t: f64,
    r: CMat,
    true_angles: Vec<f64>,
}

impl Model {
    fn new(s: &Scenario, r: &CMat) -> Self {
        Self {
            n_tx: s.config.n_tx,
            n_rx: s.config.n_rx,
            spacing: s.config.element_spacing_wavelengths,
            t: s.config.n_blocks as f64,
            r: r.clone(),
            true_angles: s.targets.angles.clone(),
        }
    }

    /// Correlation `c(φ) = q_r(φ)ᴴ Z q_t(φ)` and the steering pair.
    fn atoms(&self, phi: f64) -> (CVec, CVec) {
        (ula_steering(phi, self.n_tx, self.spacing), ula_steering(phi, self.n_rx, self.spacing))
    }

    /// Projected energy `cᴴ G⁻¹ c` for a set of angles, plus the least-squares gains.
    fn fit(&self, z: &CMat, phis: &[f64]) -> (f64, Vec<C64>) {
        let atoms: Vec<_> = phis.iter().map(|&p| self.atoms(p)).collect();
        let n = phis.len();
        let cv = CVec::from_fn(n, |i, _| atoms[i].1.dotc(&(z * &atoms[i].0)));
        let g = CMat::from_fn(n, n, |i, j| {
            let (qt_i, qr_i) = &atoms[i];
            let (qt_j, qr_j) = &atoms[j];
            qr_i.dotc(qr_j) * qt_j.dotc(&(&self.r * qt_i)) * self.t
        });
        match g.clone().try_inverse() {
            Some(gi) => {
                let gains = &gi * &cv;
                let energy = cv.dotc(&gains).re;
                (energy, gains.iter().copied().collect())
            }
            None => (f64::NEG_INFINITY, vec![c(0.0, 0.0); n]),
        }
    }

    fn estimate(&self, z: &CMat) -> Estimate {
        let lo = -std::f64::consts::FRAC_PI_2;
        let step = std::f64::consts::PI / (GRID - 1) as f64;
        let grid: Vec<f64> = (0..GRID).map(|i| lo + step * i as f64).collect();
        let k = self.true_angles.len();
        let mut best: Vec<f64> = match k {
            1 => {
                let (mut arg, mut val) = (grid[0], f64::NEG_INFINITY);
                for &p in &grid {
                    let e = self.fit(z, &[p]).0;
                    if e > val {
                        val = e;
                        arg = p;
                    }
                }
                vec![arg]
            }
            _ => {
                let coarse: Vec<f64> = grid.iter().step_by(4).copied().collect();
                let ascending = self.true_angles[0] <= self.true_angles[1];
                let (mut arg, mut val) = (vec![coarse[0], coarse[1]], f64::NEG_INFINITY);
                for (i, &a) in coarse.iter().enumerate() {
                    for &b in &coarse[i + 1..] {
                        let e = self.fit(z, &[a, b]).0;
                        if e > val {
                            val = e;
                            arg = if ascending { vec![a, b] } else { vec![b, a] };
                        }
                    }
                }
                arg
            }
        };
        let width = if k == 1 { step } else { 4.0 * step };
        for _sweep in 0..if k == 1 { 1 } else { 6 } {
            for i in 0..k {
                let f = |p: f64| {
                    let mut phis = best.clone();
                    phis[i] = p;
                    -self.fit(z, &phis).0
                };
                best[i] = golden_min(f, best[i] - width, best[i] + width, 1e-12);
            }
        }
        let (_, gains) = self.fit(z, &best);
        Estimate { angles: best, gains }
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{crb_from_fim, fim_blocks};
    use crate::scenario::{build_scenario, SystemConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(noise: f64) -> Scenario {
        let mut cfg = SystemConfig::with_dims(2, 2, 1, 1);
        cfg.noise_power = noise;
        cfg.n_blocks = 16;
        let mut s = build_scenario(&cfg, &[1.0], &[0.25], 3).unwrap();
        s.targets.power_weights = vec![1.0];
        s
    }

    #[test]
    fn argument_guards() {
        let s = tiny(1.0);
        let r = CMat::identity(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(mle_mse_oracle(&s, &r, 0, &mut rng), Err(MetricsError::InvalidArgument(_))));
        let mut big = s.clone();
        big.config.n_tx = 8;
        assert!(matches!(mle_mse_oracle(&big, &CMat::identity(8, 8), 100, &mut rng), Err(MetricsError::InstanceTooLarge(_))));
    }

    #[test]
    fn zero_noise_limit() {
        let s = tiny(1e-12);
        let r = CMat::identity(2, 2);
        let mse = mle_mse_oracle(&s, &r, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(mse.iter().all(|&m| m < 1e-12), "{mse:?}");
    }

    #[test]
    fn high_snr_close_to_crb() {
        let s = tiny(1e-3 * 4.0);
        let r = CMat::identity(2, 2) * c(0.5, 0.0);
        let crb = crb_from_fim(&fim_blocks(&s.targets, &r, s.config.n_blocks, s.config.noise_power).unwrap()).unwrap();
        let mse = mle_mse_oracle(&s, &r, 400, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let bounds = [crb.crb_angle[0], crb.crb_coeff_re[0], crb.crb_coeff_im[0]];
        for (m, b) in mse.iter().zip(bounds) {
            let ratio = m / b;
            assert!((0.75..=2.0).contains(&ratio), "mse/crb = {ratio}");
        }
    }
}
