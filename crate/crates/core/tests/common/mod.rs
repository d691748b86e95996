//! Oracles shared by the integration tests. Everything here is computed from first
//! principles (or by brute force) rather than through the optimizer.

#![allow(dead_code)]

use isac_rsma::linalg::{c, CMat, CVec, RMat, C64};
use isac_rsma::metrics::{crb_from_fim, fim_blocks, scheme_rates, BeamformerSet, CsiMode, MaScheme};
use isac_rsma::optimizer::Solution;
use isac_rsma::scenario::{ula_steering, Scenario, TargetSet};

/// Echo matrix `G(ξ) = Σ_k √o_k·p_k·q_r(φ_k)·q_t(φ_k)ᴴ` for `ξ = [φ, Re p, Im p]`.
fn echo_matrix(xi: &[f64], o: &[f64], n_tx: usize, n_rx: usize, spacing: f64) -> CMat {
    let k = o.len();
    let mut g = CMat::zeros(n_rx, n_tx);
    for i in 0..k {
        let p = c(xi[k + i], xi[2 * k + i]) * o[i].sqrt();
        let qt = ula_steering(xi[i], n_tx, spacing);
        let qr = ula_steering(xi[i], n_rx, spacing);
        g += qr * qt.adjoint() * p;
    }
    g
}

/// FIM of the Gaussian echo model `Y = G(ξ)X + N` with `XXᴴ = T·R`, from central
/// differences of `G`: `F_ij = (2T/σ²)·Re Tr(∂_iGᴴ ∂_jG R)`.
pub fn fd_fim(targets: &TargetSet, r: &CMat, n_blocks: usize, noise: f64, spacing: f64) -> RMat {
    let k = targets.len();
    let (n_tx, n_rx) = (r.nrows(), targets.steering_rx.nrows());
    let mut xi = targets.angles.clone();
    xi.extend(targets.coeffs.iter().map(|p| p.re));
    xi.extend(targets.coeffs.iter().map(|p| p.im));
    let o = &targets.power_weights;
    let h = 1e-6;
    let d: Vec<CMat> = (0..3 * k)
        .map(|i| {
            let mut up = xi.clone();
            let mut dn = xi.clone();
            up[i] += h;
            dn[i] -= h;
            (echo_matrix(&up, o, n_tx, n_rx, spacing) - echo_matrix(&dn, o, n_tx, n_rx, spacing)) / c(2.0 * h, 0.0)
        })
        .collect();
    let s = 2.0 * n_blocks as f64 / noise;
    RMat::from_fn(3 * k, 3 * k, |i, j| s * (d[i].adjoint() * &d[j] * r).trace().re)
}

pub fn rel_frobenius(a: &RMat, b: &RMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Lower `α` quantile of χ²ₙ (Wilson–Hilferty; accurate to well under 1% for n ≥ 100).
pub fn chi2_lower_quantile(n: usize, z_alpha: f64) -> f64 {
    let n = n as f64;
    let a = 2.0 / (9.0 * n);
    n * (1.0 - a + z_alpha * a.sqrt()).powi(3)
}

/// Least-squares slope of `y` against `x`.
pub fn lsq_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Result of the brute-force search on a two-antenna, one-user, one-target instance.
pub struct GridOptimum {
    pub crb_trace: f64,
    pub r_x: CMat,
    pub evaluated: usize,
}

/// Minimum trace-CRB over a grid of full-power transmit covariances
/// `R = P·[[a, z], [z*, 1−a]]`, `|z|² ≤ a(1−a)`, keeping only covariances that split into a
/// rank-one common and a rank-one private beam meeting every worst-case rate requirement.
pub fn grid_search_two_antennas(scenario: &Scenario, n_a: usize, n_r: usize, n_theta: usize) -> GridOptimum {
    let cfg = &scenario.config;
    assert_eq!(cfg.n_tx, 2);
    assert_eq!(scenario.users.len(), 1);
    let p = cfg.p_max * (1.0 - 1e-9);
    let mut best = GridOptimum { crb_trace: f64::INFINITY, r_x: CMat::zeros(2, 2), evaluated: 0 };
    for ia in 0..n_a {
        let a = ia as f64 / (n_a - 1) as f64;
        for ir in 1..=n_r {
            let rad = ir as f64 / n_r as f64 * (a * (1.0 - a)).sqrt();
            for it in 0..n_theta {
                let th = 2.0 * std::f64::consts::PI * it as f64 / n_theta as f64;
                let z = C64::from_polar(rad, th);
                let r = CMat::from_row_slice(2, 2, &[c(a, 0.0), z, z.conj(), c(1.0 - a, 0.0)]) * c(p, 0.0);
                best.evaluated += 1;
                let Ok(bundle) = fim_blocks(&scenario.targets, &r, cfg.n_blocks, cfg.noise_power) else { continue };
                let Ok(crb) = crb_from_fim(&bundle) else { continue };
                if crb.trace.is_finite() && crb.trace > 0.0 && crb.trace < best.crb_trace && has_feasible_split(scenario, &r) {
                    best.crb_trace = crb.trace;
                    best.r_x = r;
                }
            }
        }
    }
    best
}

/// Searches `R^{1/2}·Q` over 2×2 unitaries `Q` for a common/private pair meeting `I_c`, `I_p`.
fn has_feasible_split(scenario: &Scenario, r: &CMat) -> bool {
    let cfg = &scenario.config;
    let eig = r.clone().symmetric_eigen();
    let sqrt_r = &eig.eigenvectors
        * CMat::from_diagonal(&CVec::from_iterator(2, eig.eigenvalues.iter().map(|&l| c(l.max(0.0).sqrt(), 0.0))))
        * eig.eigenvectors.adjoint();
    for it in 0..=32 {
        let t = std::f64::consts::FRAC_PI_2 * it as f64 / 32.0;
        for is in 0..16 {
            let s = 2.0 * std::f64::consts::PI * is as f64 / 16.0;
            let ph = C64::from_polar(1.0, s);
            let q = CMat::from_row_slice(2, 2, &[c(t.cos(), 0.0), -ph.conj() * t.sin(), ph * t.sin(), c(t.cos(), 0.0)]);
            let w = &sqrt_r * q;
            let bf = BeamformerSet::from_vectors(w.column(0).into_owned(), vec![w.column(1).into_owned()], vec![0.0]);
            let Ok(rates) = scheme_rates(MaScheme::Rsma, &scenario.users, &bf, cfg.noise_power, CsiMode::WorstCase) else {
                continue;
            };
            if rates.rate_common >= cfg.rate_common_min && rates.rate_private[0] >= cfg.rate_private_min {
                return true;
            }
        }
    }
    false
}

/// Constraint residuals recomputed from the extracted beamformers; positive = violated.
#[derive(Debug, Clone)]
pub struct Recheck {
    pub power_excess: f64,
    pub common_deficit: f64,
    pub private_deficit: f64,
    pub split_deficit: f64,
    pub rank1_error: f64,
}

impl Recheck {
    pub fn passes(&self, tol: f64, rank1_tol: f64) -> bool {
        self.power_excess <= tol
            && self.common_deficit <= tol
            && self.private_deficit <= tol
            && self.split_deficit <= tol
            && self.rank1_error <= rank1_tol
    }

    pub fn worst(&self) -> f64 {
        self.power_excess.max(self.common_deficit).max(self.private_deficit).max(self.split_deficit)
    }
}

/// `‖U − λ₁v₁v₁ᴴ‖_F / ‖U‖_F` from the eigenvalues of a Hermitian `U`.
fn rank1_error(u: &CMat) -> f64 {
    let mut l: Vec<f64> = u.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = l.iter().map(|x| x * x).sum();
    if total <= 0.0 {
        return 0.0;
    }
    (l[1..].iter().map(|x| x * x).sum::<f64>() / total).sqrt()
}

pub fn recheck(scenario: &Scenario, sol: &Solution) -> Recheck {
    let cfg = &scenario.config;
    let bf = &sol.bf;
    let scheme = sol.scheme;
    let rates = scheme_rates(scheme, &scenario.users, bf, cfg.noise_power, CsiMode::WorstCase).expect("rates evaluate");
    let tr = |u: &CVec| u.norm_squared();
    let power = match scheme {
        MaScheme::Oma => bf.u_private.iter().map(tr).fold(0.0, f64::max),
        MaScheme::Rsma | MaScheme::IRsma => tr(&bf.u_common) + bf.u_private.iter().map(tr).sum::<f64>(),
        _ => bf.u_private.iter().map(tr).sum::<f64>(),
    };
    let rsma = scheme.has_common_stream();
    let common_deficit = if rsma { cfg.rate_common_min - rates.rate_common } else { f64::NEG_INFINITY };
    let split_deficit = if rsma { bf.rate_split.iter().sum::<f64>() - rates.rate_common } else { f64::NEG_INFINITY };
    let private_deficit =
        rates.rate_private.iter().map(|r| cfg.rate_private_min - r).fold(f64::NEG_INFINITY, f64::max);
    // the relaxed covariances are what the rank-one extraction was applied to
    let r1 = sol.iterate.streams.iter().map(rank1_error).fold(0.0, f64::max);
    Recheck { power_excess: power - cfg.p_max, common_deficit, private_deficit, split_deficit, rank1_error: r1 }
}
