//! Convex inner approximation of the bilinear SINR constraints `Tr(H·U) ≥ c₁·c₂`.

use serde::{Deserialize, Serialize};

use super::conic::{AffineExpr, ConicSubproblem, VarId, VarRole};
use super::OptimizerError;

/// First-order expansion of `√(c₁c₂)` at `(c₁₀, c₂₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricMeanTangent {
    pub c1_anchor: f64,
    pub c2_anchor: f64,
}

impl GeometricMeanTangent {
    pub fn new(c1_anchor: f64, c2_anchor: f64) -> Result<Self, OptimizerError> {
        if !(c1_anchor > 0.0 && c2_anchor > 0.0) || !c1_anchor.is_finite() || !c2_anchor.is_finite() {
            return Err(OptimizerError::NonpositiveAnchor { c1: c1_anchor, c2: c2_anchor });
        }
        Ok(Self { c1_anchor, c2_anchor })
    }

    /// `∂/∂c₁` and `∂/∂c₂` at the anchor.
    pub fn gradient(&self) -> (f64, f64) {
        let (a, b) = (self.c1_anchor, self.c2_anchor);
        (0.5 * (b / a).sqrt(), 0.5 * (a / b).sqrt())
    }

    pub fn value(&self, c1: f64, c2: f64) -> f64 {
        let (a, b) = (self.c1_anchor, self.c2_anchor);
        let (g1, g2) = self.gradient();
        (a * b).sqrt() + g1 * (c1 - a) + g2 * (c2 - b)
    }

    /// The tangent as an affine expression in the two variables.
    pub fn expr(&self, c1: &AffineExpr, c2: &AffineExpr) -> AffineExpr {
        let (g1, g2) = self.gradient();
        // √(ab) − g1·a − g2·b = 0 for the geometric mean, so the tangent is homogeneous.
        c1.clone() * g1 + c2.clone() * g2
    }
}

/// Role of a linearized rate constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConstraintKind {
    /// Common stream must carry the whole split `Σ r_c`.
    CommonSplit,
    /// Common stream meets the common-rate threshold.
    CommonQos,
    /// Private stream meets the private-rate threshold.
    PrivateQos,
}

/// What the SINR auxiliary `c₁` must support.
#[derive(Debug, Clone, Default)]
pub struct SinrTarget {
    /// SINR floor, imposed exactly.
    pub min_sinr: Option<f64>,
    /// `c₁ ≥ 2^{factor·rate} − 1` for an affine `rate`.
    pub rate_link: Option<(AffineExpr, f64)>,
}

/// Data for one linearized SINR constraint.
#[derive(Debug, Clone)]
pub struct RateConstraintSpec {
    pub label: String,
    /// `Tr(H̲·U_sig)` at the pessimistic channel.
    pub signal: AffineExpr,
    /// `Σ Tr(H̄·U_j) + 1` at the pessimistic channel (noise normalized to 1).
    pub interference_plus_noise: AffineExpr,
    pub target: SinrTarget,
    pub anchor: GeometricMeanTangent,
    /// Elastic variable relaxing the tangent inequality (feasibility phase).
    pub elastic: Option<VarId>,
    /// Relative tightening so re-evaluated constraints hold with margin.
    pub margin: f64,
}

/// Handles of the auxiliaries created by [`linearize_rate_constraint`], with the scale of each:
/// the original quantity is `scale × variable`.
#[derive(Debug, Clone, Copy)]
pub struct RateAux {
    pub c_sinr: (VarId, f64),
    pub c_interf: (VarId, f64),
    pub root: (VarId, f64),
}

/// Emits the SINR requirements of one stream at one listener.
///
/// A fixed threshold is linear in the covariances (`Tr(H̲U) ≥ γ·(interference + noise)`) and is
/// imposed exactly. A rate link needs `Tr(H̲U) ≥ c₁c₂` with a variable `c₁`, which becomes
/// `s² ≤ Tr(H̲U)`, `s ≥ tangent(c₁, c₂)`, `c₂ ≥ interference + noise` and `1 + c₁ ≥ 2^{rate}`.
/// Returns the auxiliaries of the latter, if any.
///
/// The auxiliaries are stored relative to the anchor (`c₁ = κ₁ĉ₁`, `c₂ = c₂₀ĉ₂`, `s = √(κ₁c₂₀)ŝ`)
/// so every row is of order one near the expansion point.
pub fn linearize_rate_constraint(
    problem: &mut ConicSubproblem,
    kind: RateConstraintKind,
    spec: &RateConstraintSpec,
) -> Option<RateAux> {
    let tag = match kind {
        RateConstraintKind::CommonSplit => "split",
        RateConstraintKind::CommonQos => "cqos",
        RateConstraintKind::PrivateQos => "pqos",
    };
    let l = &spec.label;
    let grow = 1.0 + spec.margin;
    let k2 = spec.anchor.c2_anchor;
    if let Some(th) = spec.target.min_sinr {
        let mut slack = (spec.signal.clone() - spec.interference_plus_noise.clone() * (th * grow)) * (1.0 / k2);
        if let Some(xi) = spec.elastic {
            slack = slack + AffineExpr::var(xi);
        }
        problem.ge(format!("{l}.min_sinr[{tag}]"), slack);
    }
    let (rate, factor) = spec.target.rate_link.as_ref()?;
    let k1 = spec.anchor.c1_anchor.max(1e-3);
    let ks = (k1 * k2).sqrt();
    let c1 = problem.add_scalar(format!("c_sinr[{tag}:{l}]"), VarRole::RateSlack);
    let c2 = problem.add_scalar(format!("c_in[{tag}:{l}]"), VarRole::RateSlack);
    let s = problem.add_scalar(format!("s[{tag}:{l}]"), VarRole::Other);
    let e1 = AffineExpr::term(c1, k1);
    let e2 = AffineExpr::term(c2, k2);

    problem.ge(format!("{l}.c_sinr>=0"), AffineExpr::var(c1));
    problem.le(format!("{l}.interference"), spec.interference_plus_noise.clone() * (grow / k2), AffineExpr::var(c2));
    // ŝ² ≤ T/κs²  ⇔  ‖(2ŝ, x − 1)‖ ≤ x + 1 with x = T/κs²
    let x = spec.signal.clone() * (1.0 / (ks * ks));
    let es = AffineExpr::var(s);
    problem.soc(format!("{l}.root"), x.clone() + 1.0, vec![es.clone() * 2.0, x - 1.0]);
    let mut rhs = spec.anchor.expr(&(e1.clone() * grow), &e2) * (1.0 / ks);
    if let Some(xi) = spec.elastic {
        rhs = rhs - AffineExpr::var(xi);
    }
    problem.ge(format!("{l}.tangent"), es - rhs);
    // 1 + c₁ ≥ exp(ln2·factor·rate)
    problem.exp_cone(
        format!("{l}.rate"),
        rate.clone() * (std::f64::consts::LN_2 * factor),
        AffineExpr::constant(1.0),
        e1 + 1.0,
    );
    Some(RateAux { c_sinr: (c1, k1), c_interf: (c2, k2), root: (s, ks) })
}
