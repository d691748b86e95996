//! Seeded oracle suites behind the `validate` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::records::ValidationRow;
use crate::linalg::{c, hermitian_eigen, min_eigenvalue_symmetric, outer, psd_sqrt, trace, CMat, CVec, RMat};
use crate::metrics::{crb_from_fim, fim_blocks, fim_matrix, rsma_rates, BeamformerSet, CsiMode};
use crate::optimizer::{
    build_schur_lmi, extract_rank1, penalty_value, zero_forcing_init, AffineExpr, FimAffine, GeometricMeanTangent,
};
use crate::scenario::{
    build_scenario, default_target_angles, default_user_angles, sample_csi_error, standard_complex_normal, ula_steering,
    ula_steering_derivative, SystemConfig, TargetSet, UserChannel,
};

fn row(suite: &str, cases: usize, worst: f64, limit: f64) -> ValidationRow {
    ValidationRow {
        suite: suite.into(),
        cases,
        passed: worst.is_finite() && worst <= limit,
        detail: format!("worst {worst:.3e} (limit {limit:.1e})"),
    }
}

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

/// `2/σ²·Re(JᴴJ)` from central differences of the noiseless echo `vec(Q_r diag(√o·p) Q_tᴴ X)`.
pub fn finite_difference_fim(targets: &TargetSet, r: &CMat, n_blocks: usize, noise_power: f64, spacing: f64) -> RMat {
    let k = targets.len();
    let (nt, nr) = (targets.steering_tx.nrows(), targets.steering_rx.nrows());
    let x = psd_sqrt(r) * c((n_blocks as f64).sqrt(), 0.0);
    let echo = |b: &[f64]| -> CVec {
        let mut a = CMat::zeros(nr, nt);
        for i in 0..k {
            let g = c(b[k + i], b[2 * k + i]) * targets.power_weights[i].sqrt();
            a += ula_steering(b[i], nr, spacing) * ula_steering(b[i], nt, spacing).adjoint() * g;
        }
        let m = a * &x;
        CVec::from_iterator(m.len(), m.iter().copied())
    };
    let mut b = targets.angles.clone();
    b.extend(targets.coeffs.iter().map(|z| z.re));
    b.extend(targets.coeffs.iter().map(|z| z.im));
    let h = 1e-6;
    let cols: Vec<CVec> = (0..3 * k)
        .map(|i| {
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[i] += h;
            bm[i] -= h;
            (echo(&bp) - echo(&bm)) / c(2.0 * h, 0.0)
        })
        .collect();
    RMat::from_fn(3 * k, 3 * k, |i, j| 2.0 / noise_power * cols[i].dotc(&cols[j]).re)
}

fn steering_unit_modulus() -> ValidationRow {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for i in 0..100 {
        let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 99.0;
        for n in 1..=8 {
            worst = ula_steering(th, n, 0.5).iter().fold(worst, |w, z| w.max((z.norm() - 1.0).abs()));
            cases += 1;
        }
    }
    row("steering_unit_modulus", cases, worst, 1e-12)
}

fn steering_derivative() -> ValidationRow {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let th = -1.5 + 3.0 * i as f64 / 99.0;
        let fd = (ula_steering(th + h, 8, 0.5) - ula_steering(th - h, 8, 0.5)) / c(2.0 * h, 0.0);
        let an = ula_steering_derivative(th, 8, 0.5);
        worst = worst.max((fd - &an).norm() / an.norm().max(1.0));
    }
    row("steering_derivative_fd", 100, worst, 1e-5)
}

fn csi_ball(rng: &mut ChaCha8Rng) -> ValidationRow {
    let radius = 0.1;
    let worst = (0..10_000).map(|_| sample_csi_error(radius, 4, rng).norm() - radius).fold(f64::NEG_INFINITY, f64::max);
    row("csi_error_ball", 10_000, worst.max(0.0), 0.0)
}

fn fim_finite_difference(rng: &mut ChaCha8Rng) -> ValidationRow {
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let (k, nt, nr) = (1 + case % 2, 2 + case % 3, 2 + (case / 3) % 3);
        let targets = rand_targets(rng, k, nt, nr);
        let r = rand_psd(rng, nt);
        let an = fim_matrix(&targets, &r, 16, 1.0);
        let fd = finite_difference_fim(&targets, &r, 16, 1.0, 0.5);
        worst = worst.max((&an - &fd).norm() / an.norm());
    }
    row("fim_finite_difference", 50, worst, 1e-5)
}

fn fim_psd_symmetric(rng: &mut ChaCha8Rng) -> ValidationRow {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let targets = rand_targets(rng, 2, 4, 4);
        let f = fim_matrix(&targets, &rand_psd(rng, 4), 8, 1.0);
        let scale = f.norm();
        let asym = (&f - f.transpose()).norm() / scale;
        let neg = (-min_eigenvalue_symmetric(&f) / scale).max(0.0);
        worst = worst.max(asym).max(neg);
    }
    row("fim_symmetric_psd", 1000, worst, 1e-10)
}

fn crb_power_scaling(rng: &mut ChaCha8Rng) -> ValidationRow {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let targets = rand_targets(rng, 2, 4, 4);
        let r = rand_psd(rng, 4) + CMat::identity(4, 4);
        let alpha = 1.0 + 9.0 * rng.gen::<f64>();
        let (Ok(a), Ok(b)) = (
            fim_blocks(&targets, &r, 8, 1.0).and_then(|f| crb_from_fim(&f)),
            fim_blocks(&targets, &(&r * c(alpha, 0.0)), 8, 1.0).and_then(|f| crb_from_fim(&f)),
        ) else {
            return row("crb_power_scaling", 0, f64::INFINITY, 1e-8);
        };
        for (x, y) in a.crb_angle.iter().chain(&a.crb_coeff_re).zip(b.crb_angle.iter().chain(&b.crb_coeff_re)) {
            worst = worst.max((x / alpha - y).abs() / y);
        }
    }
    row("crb_power_scaling", 100, worst, 1e-8)
}

fn worst_case_ordering(rng: &mut ChaCha8Rng) -> ValidationRow {
    let (n, m) = (4, 2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let radius = 0.3 * rng.gen::<f64>();
        let users: Vec<UserChannel> = (0..m)
            .map(|_| {
                let h = CVec::from_fn(n, |_, _| standard_complex_normal(rng));
                let err = sample_csi_error(radius, n, rng);
                UserChannel::new(h.clone(), radius, Some(h + err))
            })
            .collect();
        let uc = CVec::from_fn(n, |_, _| standard_complex_normal(rng));
        let up: Vec<CVec> = (0..m).map(|_| CVec::from_fn(n, |_, _| standard_complex_normal(rng))).collect();
        let bf = BeamformerSet::from_vectors(uc, up, vec![0.0; m]);
        let rates = |mode| rsma_rates(&users, &bf, 1.0, mode).expect("dimensions agree");
        let (lo, mid, hi) = (rates(CsiMode::WorstCase), rates(CsiMode::Nominal), rates(CsiMode::BestCase));
        worst = worst.max(lo.rate_common - mid.rate_common).max(mid.rate_common - hi.rate_common);
        for i in 0..m {
            worst = worst.max(lo.rate_private[i] - mid.rate_private[i]).max(mid.rate_private[i] - hi.rate_private[i]);
        }
    }
    row("worst_case_ordering", 1000, worst.max(0.0), 1e-12)
}

fn zero_forcing_nulling() -> ValidationRow {
    let mut worst: f64 = 0.0;
    let mut cfg = SystemConfig::with_dims(4, 4, 3, 2);
    cfg.csi_error_radius = 0.0;
    for seed in 0..20 {
        let t = default_target_angles(2);
        let s = build_scenario(&cfg, &default_user_angles(3, &t), &t, seed).expect("valid scenario");
        let Ok(bf) = zero_forcing_init(&s) else {
            return row("zero_forcing_nulling", 0, f64::INFINITY, 1e-8);
        };
        for (i, u) in s.users.iter().enumerate() {
            for (j, b) in bf.u_private.iter().enumerate() {
                if i != j {
                    worst = worst.max(u.h_est.dotc(b).norm());
                }
            }
        }
    }
    row("zero_forcing_nulling", 20, worst, 1e-8)
}

fn schur_equivalence(rng: &mut ChaCha8Rng) -> ValidationRow {
    let mut wrong = 0usize;
    for _ in 0..1000 {
        let k = 1 + rng.gen_range(0..2);
        let d = 3 * k;
        let g = RMat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let f = &g * g.transpose() + RMat::identity(d, d) * 0.5;
        let inv = f.clone().try_inverse().expect("positive definite");
        let delta = if rng.gen::<bool>() { 1e-3 } else { -1e-3 };
        let fim = FimAffine { dim: d, entries: (0..d * d).map(|p| AffineExpr::constant(f[(p / d, p % d)])).collect() };
        let v: Vec<AffineExpr> = (0..d).map(|i| AffineExpr::constant(inv[(i, i)] + delta)).collect();
        for l in build_schur_lmi(&fim, &v, k).expect("dimensions agree") {
            let feasible = l.min_eigenvalue(&[]) >= -1e-12;
            if feasible != (delta > 0.0) {
                wrong += 1;
            }
        }
    }
    row("schur_equivalence", 1000, wrong as f64, 0.0)
}

fn tangent_dominance(rng: &mut ChaCha8Rng) -> ValidationRow {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let a = 10f64.powf(rng.gen_range(-3.0..3.0));
        let b = 10f64.powf(rng.gen_range(-3.0..3.0));
        let t = GeometricMeanTangent::new(a, b).expect("positive anchor");
        let (x, y) = (rng.gen_range(0.0..1e3), rng.gen_range(0.0..1e3));
        let tv = t.value(x, y);
        worst = worst.max(((x * y).sqrt() - tv) / (1.0 + tv.abs()));
    }
    row("tangent_dominance", 1000, worst.max(0.0), 1e-9)
}

fn penalty_and_extraction(rng: &mut ChaCha8Rng) -> Vec<ValidationRow> {
    let mut worst_pen: f64 = 0.0;
    let mut worst_ext: f64 = 0.0;
    for _ in 0..200 {
        let u = rand_psd(rng, 4);
        let (vals, vecs) = hermitian_eigen(&u);
        let lead = vecs.column(0).into_owned();
        worst_pen = worst_pen.max((penalty_value(&u, &lead) - (trace(&u).re - vals[0])).abs() / trace(&u).re);

        let v = CVec::from_fn(4, |_, _| standard_complex_normal(rng));
        let w = CVec::from_fn(4, |_, _| standard_complex_normal(rng));
        let w = &w - &v * (v.dotc(&w) / c(v.norm_squared(), 0.0));
        let near = outer(&v) + outer(&w) * c(1e-6 * v.norm_squared() / w.norm_squared(), 0.0);
        let e = extract_rank1(&near).expect("nonzero matrix");
        worst_ext = worst_ext.max(e.reconstruction_error);
    }
    vec![row("penalty_eigen", 200, worst_pen, 1e-10), row("rank1_extraction", 200, worst_ext, 2e-6)]
}

/// Runs every suite with a generator seeded from `seed`.
pub fn run_validation(seed: u64) -> Vec<ValidationRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![steering_unit_modulus(), steering_derivative(), csi_ball(&mut rng)];
    rows.push(fim_finite_difference(&mut rng));
    rows.push(fim_psd_symmetric(&mut rng));
    rows.push(crb_power_scaling(&mut rng));
    rows.push(worst_case_ordering(&mut rng));
    rows.push(zero_forcing_nulling());
    rows.push(schur_equivalence(&mut rng));
    rows.push(tangent_dominance(&mut rng));
    rows.extend(penalty_and_extraction(&mut rng));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let rows = run_validation(1);
        for r in &rows {
            assert!(r.passed, "{}: {}", r.suite, r.detail);
        }
        assert_eq!(rows, run_validation(1));
    }
}
