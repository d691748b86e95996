use std::f64::consts::PI;

use crate::linalg::{c, CVec};

/// ULA response with entry `n = exp(j·2π·d·n·sin θ)`, `n = 0..N−1`.
pub fn ula_steering(angle: f64, n_elems: usize, spacing: f64) -> CVec {
    let k = 2.0 * PI * spacing * angle.sin();
    CVec::from_fn(n_elems, |n, _| {
        let ph = k * n as f64;
        c(ph.cos(), ph.sin())
    })
}

/// Elementwise derivative of [`ula_steering`] with respect to the angle.
pub fn ula_steering_derivative(angle: f64, n_elems: usize, spacing: f64) -> CVec {
    let k = 2.0 * PI * spacing * angle.sin();
    let dk = 2.0 * PI * spacing * angle.cos();
    CVec::from_fn(n_elems, |n, _| {
        let nf = n as f64;
        let ph = k * nf;
        c(0.0, dk * nf) * c(ph.cos(), ph.sin())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &CVec, b: &[crate::linalg::C64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn broadside_and_quarter_wave_examples() {
        let one = c(1.0, 0.0);
        assert!(close(&ula_steering(0.0, 4, 0.5), &[one; 4], 1e-15));
        let expect = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        assert!(close(&ula_steering(PI / 6.0, 4, 0.5), &expect, 1e-12));
        assert!(close(&ula_steering(1.234, 1, 0.5), &[one], 1e-15));
    }

    #[test]
    fn derivative_examples() {
        let expect = [c(0.0, 0.0), c(0.0, PI), c(0.0, 2.0 * PI), c(0.0, 3.0 * PI)];
        assert!(close(&ula_steering_derivative(0.0, 4, 0.5), &expect, 1e-12));
        assert!(ula_steering_derivative(PI / 2.0, 4, 0.5).norm() < 1e-12);
    }

    #[test]
    fn derivative_matches_central_difference_on_grid() {
        let h = 1e-6;
        for i in 0..100 {
            let th = -1.5 + 3.0 * i as f64 / 99.0;
            for &(n, d) in &[(4usize, 0.5), (8, 0.5), (3, 0.7)] {
                let fd = (ula_steering(th + h, n, d) - ula_steering(th - h, n, d)) / c(2.0 * h, 0.0);
                let an = ula_steering_derivative(th, n, d);
                let scale = an.norm().max(1.0);
                assert!((fd - &an).norm() / scale <= 1e-5, "θ={th} n={n}");
            }
        }
    }

    proptest! {
        #[test]
        fn unit_modulus(th in -3.2f64..3.2, n in 1usize..16, d in 0.1f64..2.0) {
            for z in ula_steering(th, n, d).iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
