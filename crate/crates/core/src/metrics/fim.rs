use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::linalg::{c, quad_form, CMat, RMat};
use crate::scenario::TargetSet;
use crate::serde_complex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimBundle {
    #[serde(with = "serde_complex::cmat")]
    pub f11: CMat,
    #[serde(with = "serde_complex::cmat")]
    pub f12: CMat,
    #[serde(with = "serde_complex::cmat")]
    pub f22: CMat,
    #[serde(with = "serde_complex::rmat")]
    pub fim: RMat,
    pub noise_power: f64,
    pub n_blocks: usize,
    pub mean_vector_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    #[serde(with = "serde_complex::rmat")]
    pub crb_matrix: RMat,
    pub crb_angle: Vec<f64>,
    pub crb_coeff_re: Vec<f64>,
    pub crb_coeff_im: Vec<f64>,
    pub trace: f64,
    pub parameter_order: Vec<String>,
}

impl CrbReport {
    pub fn angle_db(&self) -> Vec<f64> {
        self.crb_angle.iter().map(|x| 10.0 * x.log10()).collect()
    }

    /// `CRB(Re p_k) + CRB(Im p_k)` in dB.
    pub fn coeff_db(&self) -> Vec<f64> {
        self.crb_coeff_re.iter().zip(&self.crb_coeff_im).map(|(a, b)| 10.0 * (a + b).log10()).collect()
    }

    pub fn trace_db(&self) -> f64 {
        10.0 * self.trace.log10()
    }
}

/// Complex blocks `(F₁₁, F₁₂, F₂₂)` for covariance `r` (any Hermitian matrix; the map is linear).
///
/// Target `k`'s transmit steering and its derivative are scaled by `√o_k`.
fn blocks(targets: &TargetSet, r: &CMat, n_blocks: usize) -> (CMat, CMat, CMat) {
    let k = targets.len();
    let t = n_blocks as f64;
    let sq: Vec<f64> = targets.power_weights.iter().map(|o| o.max(0.0).sqrt()).collect();
    let at: Vec<_> = (0..k).map(|i| targets.steering_tx.column(i) * c(sq[i], 0.0)).collect();
    let adt: Vec<_> = (0..k).map(|i| targets.steering_tx_deriv.column(i) * c(sq[i], 0.0)).collect();
    let ar: Vec<_> = (0..k).map(|i| targets.steering_rx.column(i).into_owned()).collect();
    let adr: Vec<_> = (0..k).map(|i| targets.steering_rx_deriv.column(i).into_owned()).collect();
    let p = &targets.coeffs;
    let ip = |a: &crate::linalg::CVec, b: &crate::linalg::CVec| a.dotc(b);
    let mut f11 = CMat::zeros(k, k);
    let mut f12 = CMat::zeros(k, k);
    let mut f22 = CMat::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let rr = ip(&ar[a], &ar[b]);
            let dr_r = ip(&adr[a], &ar[b]);
            let r_dr = ip(&ar[a], &adr[b]);
            let dr_dr = ip(&adr[a], &adr[b]);
            let t_tt = quad_form(&at[b], r, &at[a]);
            let t_dt = quad_form(&adt[b], r, &at[a]);
            let t_td = quad_form(&at[b], r, &adt[a]);
            let t_dd = quad_form(&adt[b], r, &adt[a]);
            f22[(a, b)] = rr * t_tt * t;
            f12[(a, b)] = p[a].conj() * (dr_r * t_tt + rr * t_td) * t;
            f11[(a, b)] = p[a].conj() * p[b] * (dr_dr * t_tt + dr_r * t_dt + r_dr * t_td + rr * t_dd) * t;
        }
    }
    (f11, f12, f22)
}

fn assemble(f11: &CMat, f12: &CMat, f22: &CMat, noise_power: f64) -> RMat {
    let k = f11.nrows();
    let mut f = RMat::zeros(3 * k, 3 * k);
    let s = 2.0 / noise_power;
    let put = |f: &mut RMat, bi: usize, bj: usize, m: &dyn Fn(usize, usize) -> f64| {
        for i in 0..k {
            for j in 0..k {
                f[(bi * k + i, bj * k + j)] = s * m(i, j);
            }
        }
    };
    put(&mut f, 0, 0, &|i, j| f11[(i, j)].re);
    put(&mut f, 0, 1, &|i, j| f12[(i, j)].re);
    put(&mut f, 0, 2, &|i, j| -f12[(i, j)].im);
    put(&mut f, 1, 0, &|i, j| f12[(j, i)].re);
    put(&mut f, 1, 1, &|i, j| f22[(i, j)].re);
    put(&mut f, 1, 2, &|i, j| -f22[(i, j)].im);
    put(&mut f, 2, 0, &|i, j| -f12[(j, i)].im);
    put(&mut f, 2, 1, &|i, j| -f22[(j, i)].im);
    put(&mut f, 2, 2, &|i, j| f22[(i, j)].re);
    f
}

/// Real `3K×3K` FIM over `[φ, Re p, Im p]` for covariance `r`; linear in `r`.
pub fn fim_matrix(targets: &TargetSet, r: &CMat, n_blocks: usize, noise_power: f64) -> RMat {
    let (f11, f12, f22) = blocks(targets, r, n_blocks);
    assemble(&f11, &f12, &f22, noise_power)
}

pub fn fim_blocks(targets: &TargetSet, r_x: &CMat, n_blocks: usize, noise_power: f64) -> Result<FimBundle, MetricsError> {
    let n_tx = targets.steering_tx.nrows();
    if r_x.nrows() != n_tx || r_x.ncols() != n_tx {
        return Err(MetricsError::DimensionMismatch(format!(
            "covariance is {}×{}, array has {n_tx} elements",
            r_x.nrows(),
            r_x.ncols()
        )));
    }
    if targets.power_weights.len() != targets.len() || targets.coeffs.len() != targets.len() {
        return Err(MetricsError::DimensionMismatch("target parameter lengths differ".into()));
    }
    let (f11, f12, f22) = blocks(targets, r_x, n_blocks);
    let fim = assemble(&f11, &f12, &f22, noise_power);
    Ok(FimBundle {
        f11,
        f12,
        f22,
        fim,
        noise_power,
        n_blocks,
        mean_vector_dim: n_blocks * targets.steering_rx.nrows(),
    })
}

/// Inverse FIM. Fails with [`MetricsError::SingularFim`] above condition number 1e12.
pub fn crb_from_fim(bundle: &FimBundle) -> Result<CrbReport, MetricsError> {
    let f = &bundle.fim;
    let n = f.nrows();
    if n == 0 || n % 3 != 0 || f.ncols() != n {
        return Err(MetricsError::DimensionMismatch(format!("FIM is {}×{}", n, f.ncols())));
    }
    let sym = (f + f.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eig = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min_eig > 0.0) || max_eig / min_eig > 1e12 {
        return Err(MetricsError::SingularFim { min_eig });
    }
    let inv = match sym.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => return Err(MetricsError::SingularFim { min_eig }),
    };
    let inv = (&inv + inv.transpose()) * 0.5;
    let k = n / 3;
    let diag = |off: usize| (0..k).map(|i| inv[(off + i, off + i)]).collect::<Vec<_>>();
    let mut order = Vec::with_capacity(n);
    for prefix in ["phi", "p_re", "p_im"] {
        for i in 0..k {
            order.push(format!("{prefix}_{}", i + 1));
        }
    }
    Ok(CrbReport {
        crb_angle: diag(0),
        crb_coeff_re: diag(k),
        crb_coeff_im: diag(2 * k),
        trace: inv.trace(),
        crb_matrix: inv,
        parameter_order: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{psd_sqrt, CVec};
    use crate::scenario::standard_complex_normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_psd(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let g = CMat::from_fn(n, n, |_, _| standard_complex_normal(rng));
        &g * g.adjoint()
    }

    fn rand_targets(rng: &mut ChaCha8Rng, k: usize, n_tx: usize, n_rx: usize) -> TargetSet {
        let angles: Vec<f64> = (0..k).map(|i| -0.9 + 1.8 * (i as f64 + rng.gen::<f64>()) / k as f64).collect();
        let coeffs = CVec::from_fn(k, |_, _| standard_complex_normal(rng));
        let o: Vec<f64> = (0..k).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
        TargetSet::new(&angles, coeffs, n_tx, n_rx, 0.5).with_power_weights(&o)
    }

    /// Mean echo `vec(Σ_k √o_k p_k q_r,k q_t,kᴴ X)` for parameter vector `[φ, Re p, Im p]`.
    fn mean_vector(base: &TargetSet, b: &[f64], x: &CMat) -> CVec {
        let k = base.len();
        let (nt, nr) = (base.steering_tx.nrows(), base.steering_rx.nrows());
        let mut a = CMat::zeros(nr, nt);
        for i in 0..k {
            let qt = crate::scenario::ula_steering(b[i], nt, 0.5);
            let qr = crate::scenario::ula_steering(b[i], nr, 0.5);
            let p = c(b[k + i], b[2 * k + i]) * base.power_weights[i].sqrt();
            a += &qr * qt.adjoint() * p;
        }
        let m = a * x;
        CVec::from_iterator(m.len(), m.iter().copied())
    }

    /// Finite-difference FIM `2/σ² Re(Jᴴ J)` with `X = √T·R^{1/2}`.
    fn fd_fim(targets: &TargetSet, r: &CMat, t: usize, sigma2: f64) -> RMat {
        let k = targets.len();
        let x = psd_sqrt(r) * c((t as f64).sqrt(), 0.0);
        let mut b = targets.angles.clone();
        b.extend(targets.coeffs.iter().map(|z| z.re));
        b.extend(targets.coeffs.iter().map(|z| z.im));
        let h = 1e-6;
        let cols: Vec<CVec> = (0..3 * k)
            .map(|i| {
                let (mut bp, mut bm) = (b.clone(), b.clone());
                bp[i] += h;
                bm[i] -= h;
                (mean_vector(targets, &bp, &x) - mean_vector(targets, &bm, &x)) / c(2.0 * h, 0.0)
            })
            .collect();
        RMat::from_fn(3 * k, 3 * k, |i, j| 2.0 / sigma2 * cols[i].dotc(&cols[j]).re)
    }

    #[test]
    fn matches_finite_difference_fim() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..50 {
            let k = rng.gen_range(1..=2);
            let nt = rng.gen_range(2..=4);
            let nr = rng.gen_range(2..=4);
            let tg = rand_targets(&mut rng, k, nt, nr);
            let r = rand_psd(&mut rng, nt);
            let an = fim_matrix(&tg, &r, 10, 0.7);
            let fd = fd_fim(&tg, &r, 10, 0.7);
            let rel = (&an - &fd).norm() / an.norm();
            assert!(rel <= 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn single_antenna_single_target() {
        let tg = TargetSet::new(&[0.3], CVec::from_element(1, c(1.0, 0.5)), 1, 1, 0.5).with_power_weights(&[1.0]);
        let r = CMat::from_element(1, 1, c(2.5, 0.0));
        let b = fim_blocks(&tg, &r, 7, 1.0).unwrap();
        assert!(b.f11.norm() < 1e-15);
        assert!((b.f22[(0, 0)] - c(7.0 * 2.5, 0.0)).norm() < 1e-12);
        assert!(matches!(crb_from_fim(&b), Err(MetricsError::SingularFim { .. })));
        // Gain-only sub-problem: CRB(Re p) = σ²/(2·T·P_tx).
        let f22 = b.fim[(1, 1)];
        assert!((1.0 / f22 - 1.0 / (2.0 * 7.0 * 2.5)).abs() < 1e-15);
    }

    #[test]
    fn scaled_identity_inverse() {
        let k = 2;
        let fim = RMat::identity(3 * k, 3 * k) * 4.0;
        let b = FimBundle {
            f11: CMat::zeros(k, k),
            f12: CMat::zeros(k, k),
            f22: CMat::zeros(k, k),
            fim,
            noise_power: 1.0,
            n_blocks: 1,
            mean_vector_dim: 1,
        };
        let crb = crb_from_fim(&b).unwrap();
        assert!((crb.crb_matrix - RMat::identity(6, 6) * 0.25).norm() < 1e-15);
        assert!((crb.trace - 6.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn near_duplicate_angles_singular() {
        let tg = TargetSet::new(&[0.2, 0.2 + 1e-8], CVec::from_element(2, c(1.0, 0.0)), 4, 4, 0.5);
        let b = fim_blocks(&tg, &CMat::identity(4, 4), 10, 1.0).unwrap();
        assert!(matches!(crb_from_fim(&b), Err(MetricsError::SingularFim { .. })));
    }

    #[test]
    fn linear_in_covariance_and_crb_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tg = rand_targets(&mut rng, 2, 4, 4);
        let r = rand_psd(&mut rng, 4);
        let a = fim_blocks(&tg, &r, 10, 1.0).unwrap();
        let b = fim_blocks(&tg, &(&r * c(2.0, 0.0)), 10, 1.0).unwrap();
        assert!((&b.f11 - &a.f11 * c(2.0, 0.0)).norm() <= 1e-12 * a.f11.norm());
        assert!((&b.f12 - &a.f12 * c(2.0, 0.0)).norm() <= 1e-12 * a.f12.norm());
        assert!((&b.fim - &a.fim * 2.0).norm() <= 1e-12 * a.fim.norm());
        let ca = crb_from_fim(&a).unwrap();
        let cb = crb_from_fim(&b).unwrap();
        for (x, y) in ca.crb_angle.iter().zip(&cb.crb_angle) {
            assert!((x / 2.0 - y).abs() <= 1e-9 * x);
        }
    }

    #[test]
    fn vectorization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vec_of = |m: &CMat| CVec::from_iterator(m.len(), m.iter().copied());
        for _ in 0..20 {
            let (nr, nt, t) = (3, 4, 5);
            let a = CMat::from_fn(nr, nt, |_, _| standard_complex_normal(&mut rng));
            let x = CMat::from_fn(nt, t, |_, _| standard_complex_normal(&mut rng));
            let lhs = vec_of(&(&a * &x));
            let rhs = x.transpose().kronecker(&CMat::identity(nr, nr)) * vec_of(&a);
            assert!((lhs - rhs).norm() <= 1e-12 * a.norm() * x.norm());
        }
    }

    #[test]
    fn fuzz_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let k = rng.gen_range(1..=3);
            let nt = rng.gen_range(1..=5);
            let nr = rng.gen_range(1..=5);
            let tg = rand_targets(&mut rng, k, nt, nr);
            let r = rand_psd(&mut rng, nt);
            let f = fim_matrix(&tg, &r, 5, 1.0);
            let scale = f.norm().max(1.0);
            assert!((&f - f.transpose()).norm() <= 1e-10 * scale);
            assert!(crate::linalg::min_eigenvalue_symmetric(&f) >= -1e-8 * scale);
        }
    }
}
