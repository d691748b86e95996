//! Sensing-power intervals keeping every target's echo SCNR within `ρ0` of the others.

use super::conic::{AffineExpr, LinearConstraint, Sense};

/// `γ_min/γ_o,k ≤ o_k ≤ (γ_min + ρ0)/γ_o,k` written as `γ_o,k·o_k − γ_min ≥ 0` and
/// `γ_min + ρ0 − γ_o,k·o_k ≥ 0`.
pub fn fairness_power_bounds(gamma_min: &AffineExpr, rho0: f64, gamma_unit: &[f64], o: &[AffineExpr]) -> Vec<LinearConstraint> {
    let mut out = Vec::with_capacity(2 * o.len());
    for (k, (ok, &g)) in o.iter().zip(gamma_unit).enumerate() {
        out.push(LinearConstraint {
            label: format!("fair_lo[{k}]"),
            expr: (ok.clone() * g - gamma_min.clone()).compact(),
            sense: Sense::NonNeg,
        });
        out.push(LinearConstraint {
            label: format!("fair_hi[{k}]"),
            expr: (gamma_min.clone() + rho0 - ok.clone() * g).compact(),
            sense: Sense::NonNeg,
        });
    }
    out
}

/// Closed-form interval for each `o_k` given a fixed `γ_min`.
pub fn fairness_interval(gamma_min: f64, rho0: f64, gamma_unit: &[f64]) -> Vec<(f64, f64)> {
    gamma_unit.iter().map(|&g| (gamma_min / g, (gamma_min + rho0) / g)).collect()
}

/// Largest pairwise SCNR difference.
pub fn scnr_gap(scnr: &[f64]) -> f64 {
    let hi = scnr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = scnr.iter().copied().fold(f64::INFINITY, f64::min);
    if scnr.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_substitution() {
        assert_eq!(fairness_interval(1.0, 0.5, &[2.0]), vec![(0.5, 0.75)]);
        let iv = fairness_interval(1.0, 1.0, &[1.0, 2.0, 4.0]);
        assert_eq!(iv, vec![(1.0, 2.0), (0.5, 1.0), (0.25, 0.5)]);
        let iv = fairness_interval(2.0, 0.0, &[1.0, 4.0]);
        assert_eq!(iv[0].0 * 1.0, iv[1].0 * 4.0);
        assert_eq!(iv[0].0, iv[0].1);
    }

    #[test]
    fn linear_form_agrees_with_interval() {
        // variables: o_0 = x0, o_1 = x1, γ_min = x2
        let o = vec![AffineExpr::var(0), AffineExpr::var(1)];
        let cons = fairness_power_bounds(&AffineExpr::var(2), 0.5, &[2.0, 4.0], &o);
        let ok = |x: &[f64]| cons.iter().all(|c| c.expr.eval(x) >= -1e-12);
        assert!(ok(&[0.5, 0.25, 1.0]));
        assert!(ok(&[0.75, 0.375, 1.0]));
        assert!(!ok(&[0.8, 0.25, 1.0]));
        assert!(!ok(&[0.5, 0.2, 1.0]));
    }

    #[test]
    fn gap() {
        assert_eq!(scnr_gap(&[3.0, 1.0, 2.5]), 2.0);
        assert_eq!(scnr_gap(&[]), 0.0);
    }
}
