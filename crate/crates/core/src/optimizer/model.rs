//! Assembly of one convexified subproblem from the current iterate.

use serde::{Deserialize, Serialize};

use super::conic::{sum_exprs, AffineExpr, ConicSubproblem, MatrixVar, VarId, VarRole};
use super::fairness::fairness_power_bounds;
use super::penalty::{leading_unit_vector, penalty_objective};
use super::schur::{build_schur_lmi_scaled, FimAffine};
use super::taylor::{linearize_rate_constraint, GeometricMeanTangent, RateConstraintKind, RateConstraintSpec, SinrTarget};
use super::OptimizerError;
use crate::linalg::{c, outer, re_trace_product, CMat, CVec, RMat};
use crate::metrics::{fim_matrix, noma_order, unit_scnr, MaScheme};
use crate::scenario::{Scenario, SystemConfig};

/// Relative tightening applied to every rate constraint.
pub(crate) const RATE_MARGIN: f64 = 1e-5;
/// Relative tightening of the power budget.
pub(crate) const POWER_MARGIN: f64 = 1e-7;

/// How sensing power is split between targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerPolicy {
    /// Optimized `o` with per-target SCNRs kept within `ρ0`.
    FairnessAware,
    /// `o_k = 1/K`.
    EqualityAware,
}

impl PowerPolicy {
    pub fn tag(self) -> &'static str {
        match self {
            Self::FairnessAware => "fairness",
            Self::EqualityAware => "equality",
        }
    }
}

impl std::str::FromStr for PowerPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fairness" | "fairness_aware" => Ok(Self::FairnessAware),
            "equality" | "equality_aware" => Ok(Self::EqualityAware),
            other => Err(format!("unknown policy '{other}' (expected fairness|equality)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Minimize the total elastic relaxation of the rate constraints.
    Feasibility,
    /// Penalized weighted objective.
    Main,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Common,
    Private(usize),
}

/// Stream list of a scheme: the common stream (if any) first.
pub fn streams_of(scheme: MaScheme, n_users: usize) -> Vec<StreamKind> {
    let mut s = Vec::with_capacity(n_users + 1);
    if scheme.has_common_stream() {
        s.push(StreamKind::Common);
    }
    s.extend((0..n_users).map(StreamKind::Private));
    s
}

/// Decision values carried between iterations, in normalized units (`U = P_max·Ũ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    #[serde(with = "crate::serde_complex::cmat_list")]
    pub streams: Vec<CMat>,
    pub o: Vec<f64>,
    pub rate_split: Vec<f64>,
}

/// Everything the next subproblem is linearized around.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaState {
    pub scheme: MaScheme,
    pub policy: PowerPolicy,
    pub phase: Phase,
    pub iterate_index: usize,
    pub iterate: Iterate,
    /// Taylor anchors `(c₁₀, c₂₀)` of the last assembled subproblem.
    pub anchors: Vec<GeometricMeanTangent>,
    /// Unit penalty directions per stream.
    #[serde(with = "crate::serde_complex::cvec_list")]
    pub bf_anchor: Vec<CVec>,
    pub penalty_common: f64,
    pub penalty_private: Vec<f64>,
    pub objective_trace: Vec<f64>,
    /// Fixed beam directions (power-only refinement) instead of full Hermitian streams.
    #[serde(default, with = "crate::serde_complex::cvec_list")]
    pub fixed_directions: Vec<CVec>,
    /// Normalization of the sensing term (trace CRB at the zero-forcing start).
    pub crb_ref: f64,
}

impl ScaState {
    pub fn new(scheme: MaScheme, policy: PowerPolicy, iterate: Iterate, cfg: &SystemConfig, crb_ref: f64) -> Self {
        let bf_anchor = iterate.streams.iter().map(leading_unit_vector).collect();
        Self {
            scheme,
            policy,
            phase: Phase::Feasibility,
            iterate_index: 0,
            iterate,
            anchors: vec![],
            bf_anchor,
            penalty_common: cfg.penalty_common,
            penalty_private: cfg.penalty_private.clone(),
            objective_trace: vec![],
            fixed_directions: vec![],
            crb_ref,
        }
    }

    pub fn penalty_for(&self, kind: StreamKind) -> f64 {
        match kind {
            StreamKind::Common => self.penalty_common,
            StreamKind::Private(m) => self.penalty_private[m],
        }
    }

    pub fn grow_penalties(&mut self, growth: f64) {
        self.penalty_common *= 1.0 + growth;
        for x in &mut self.penalty_private {
            *x *= 1.0 + growth;
        }
    }
}

/// Scale factors between physical and normalized quantities.
#[derive(Debug, Clone, Copy)]
pub struct Scaling {
    /// `P_max/σ²`: channel Grams are multiplied by this so noise becomes 1.
    pub snr: f64,
    /// `2·T·N_r·N_t·p₀/σ²`: FIM of a normalized covariance is divided by this.
    pub kappa: f64,
    pub p_max: f64,
}

impl Scaling {
    pub fn new(cfg: &SystemConfig) -> Self {
        let kappa = 2.0 * cfg.n_blocks as f64 * (cfg.n_rx * cfg.n_tx) as f64 * cfg.mean_target_gain / cfg.noise_power;
        Self { snr: cfg.p_max / cfg.noise_power, kappa, p_max: cfg.p_max }
    }

    /// Physical CRB diagonal from a normalized one.
    pub fn crb_physical(&self, normalized: f64) -> f64 {
        normalized / (self.kappa * self.p_max)
    }
}

/// Where a rate link draws its rate from.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RateRef {
    Split,
    Private(usize),
}

#[derive(Debug, Clone)]
struct SinrRequirement {
    label: String,
    kind: RateConstraintKind,
    listener: usize,
    signal: usize,
    interference: Vec<usize>,
    min_sinr: Option<f64>,
    link: Option<(RateRef, f64)>,
}

fn requirements(scenario: &Scenario, cfg: &SystemConfig, scheme: MaScheme, streams: &[StreamKind]) -> Vec<SinrRequirement> {
    let m_users = scenario.users.len();
    let idx = |k: StreamKind| streams.iter().position(|&s| s == k).expect("stream present");
    let privates: Vec<usize> = (0..m_users).map(|m| idx(StreamKind::Private(m))).collect();
    let qos_c = 2f64.powf(cfg.rate_common_min) - 1.0;
    let qos_p = 2f64.powf(cfg.rate_private_min) - 1.0;
    let mut out = vec![];
    match scheme {
        MaScheme::Rsma | MaScheme::IRsma => {
            let common = idx(StreamKind::Common);
            for m in 0..m_users {
                out.push(SinrRequirement {
                    label: format!("u{m}"),
                    kind: RateConstraintKind::CommonSplit,
                    listener: m,
                    signal: common,
                    interference: privates.clone(),
                    min_sinr: None,
                    link: Some((RateRef::Split, 1.0)),
                });
                out.push(SinrRequirement {
                    label: format!("u{m}"),
                    kind: RateConstraintKind::CommonQos,
                    listener: m,
                    signal: common,
                    interference: privates.clone(),
                    min_sinr: Some(qos_c),
                    link: None,
                });
            }
            for m in 0..m_users {
                out.push(private_req(m, m, &privates, qos_p));
            }
        }
        MaScheme::Sdma => {
            for m in 0..m_users {
                out.push(private_req(m, m, &privates, qos_p));
            }
        }
        MaScheme::Noma => {
            let order = noma_order(&scenario.users);
            for (i, &listener) in order.iter().enumerate() {
                for j in 0..=i {
                    let stream_user = order[j];
                    out.push(SinrRequirement {
                        label: format!("u{listener}<-s{stream_user}"),
                        kind: RateConstraintKind::PrivateQos,
                        listener,
                        signal: privates[stream_user],
                        interference: order[j + 1..].iter().map(|&u| privates[u]).collect(),
                        min_sinr: Some(qos_p),
                        link: Some((RateRef::Private(stream_user), 1.0)),
                    });
                }
            }
        }
        MaScheme::Oma => {
            let mf = m_users as f64;
            for m in 0..m_users {
                out.push(SinrRequirement {
                    label: format!("u{m}"),
                    kind: RateConstraintKind::PrivateQos,
                    listener: m,
                    signal: privates[m],
                    interference: vec![],
                    min_sinr: Some(2f64.powf(mf * cfg.rate_private_min) - 1.0),
                    link: Some((RateRef::Private(m), mf)),
                });
            }
        }
    }
    out
}

fn private_req(m: usize, listener: usize, privates: &[usize], qos_p: f64) -> SinrRequirement {
    SinrRequirement {
        label: format!("u{m}"),
        kind: RateConstraintKind::PrivateQos,
        listener,
        signal: privates[m],
        interference: privates.iter().copied().filter(|&j| j != privates[m]).collect(),
        min_sinr: Some(qos_p),
        link: Some((RateRef::Private(m), 1.0)),
    }
}

/// Pessimistic normalized Grams `(H_es ∓ e·I)·P_max/σ²` for signal and interference terms.
fn grams(scenario: &Scenario, scaling: &Scaling) -> Vec<(CMat, CMat)> {
    scenario
        .users
        .iter()
        .map(|u| {
            let n = u.h_est.len();
            let h = outer(&u.h_est);
            let e = CMat::identity(n, n) * c(u.e_h_max, 0.0);
            ((&h - &e) * c(scaling.snr, 0.0), (&h + &e) * c(scaling.snr, 0.0))
        })
        .collect()
}

/// Covariance weight of each stream (OMA slots are time-shared).
pub fn stream_weights(scheme: MaScheme, n_streams: usize, n_users: usize) -> Vec<f64> {
    match scheme {
        MaScheme::Oma => vec![1.0 / n_users as f64; n_streams],
        _ => vec![1.0; n_streams],
    }
}

/// Normalized FIM `F̃(R̃)` (unit sensing weights) for a normalized covariance.
pub fn normalized_fim(scenario: &Scenario, cfg: &SystemConfig, r: &CMat) -> RMat {
    let targets = scenario.targets.with_power_weights(&vec![1.0; scenario.targets.len()]);
    fim_matrix(&targets, r, cfg.n_blocks, cfg.noise_power) / Scaling::new(cfg).kappa
}

/// Normalized covariance of an iterate.
pub fn iterate_covariance(scheme: MaScheme, it: &Iterate, n_users: usize) -> CMat {
    let w = stream_weights(scheme, it.streams.len(), n_users);
    let n = it.streams[0].nrows();
    it.streams.iter().zip(&w).fold(CMat::zeros(n, n), |acc, (u, &wi)| acc + u * c(wi, 0.0))
}

/// `Σ_i [F̃⁻¹]_ii / o_k(i)`, or `None` when the FIM is not invertible.
pub fn normalized_crb_diag(scenario: &Scenario, cfg: &SystemConfig, r: &CMat) -> Option<Vec<f64>> {
    let f = normalized_fim(scenario, cfg, r);
    let f = (&f + f.transpose()) * 0.5;
    let inv = f.cholesky()?.inverse();
    Some((0..inv.nrows()).map(|i| inv[(i, i)]).collect())
}

/// Per-target echo SCNR per unit sensing weight at the mean reflection gain `p₀`.
pub fn gamma_unit(scenario: &Scenario, cfg: &SystemConfig) -> Vec<f64> {
    unit_scnr(&scenario.targets, cfg.noise_power).into_iter().map(|u| u * cfg.mean_target_gain).collect()
}

/// Lower bound on `γ_min`: one tenth of the weakest target's SCNR under an equal split.
pub fn gamma_floor(gamma_unit: &[f64]) -> f64 {
    let k = gamma_unit.len() as f64;
    0.1 * gamma_unit.iter().copied().fold(f64::INFINITY, f64::min) / k
}

/// A sensing split inside the fairness box: equal SCNRs, `Σo ≤ 1`, `o ≤ 1`.
pub fn initial_power_weights(policy: PowerPolicy, gamma_unit: &[f64]) -> Vec<f64> {
    let k = gamma_unit.len();
    match policy {
        PowerPolicy::EqualityAware => vec![1.0 / k as f64; k],
        PowerPolicy::FairnessAware => {
            let inv_sum: f64 = gamma_unit.iter().map(|g| 1.0 / g).sum();
            let gmin = gamma_unit.iter().copied().fold(f64::INFINITY, f64::min);
            let g = (1.0 / inv_sum).min(gmin) * (1.0 - 1e-6);
            gamma_unit.iter().map(|u| g / u).collect()
        }
    }
}

/// Worst-case `(R_c, R_1..R_M)` of an iterate, from the same pessimistic Grams as the constraints.
pub fn iterate_rates(scenario: &Scenario, cfg: &SystemConfig, scheme: MaScheme, it: &Iterate) -> (f64, Vec<f64>) {
    let scaling = Scaling::new(cfg);
    let grams = grams(scenario, &scaling);
    let kinds = streams_of(scheme, scenario.users.len());
    let m_users = scenario.users.len();
    let mut private = vec![f64::INFINITY; m_users];
    let mut common = f64::INFINITY;
    for req in requirements(scenario, cfg, scheme, &kinds) {
        let (g_sig, g_int) = &grams[req.listener];
        let sig = re_trace_product(g_sig, &it.streams[req.signal]).max(0.0);
        let int: f64 = req.interference.iter().map(|&j| re_trace_product(g_int, &it.streams[j]).max(0.0)).sum();
        let factor = req.link.map_or(1.0, |(_, f)| f);
        let rate = (1.0 + sig / (int + 1.0)).log2() / factor;
        match (req.kind, req.link) {
            (RateConstraintKind::CommonQos, _) => common = common.min(rate),
            (RateConstraintKind::PrivateQos, Some((RateRef::Private(m), _))) => private[m] = private[m].min(rate),
            _ => {}
        }
    }
    (if common.is_finite() { common } else { 0.0 }, private)
}

/// Split of the common rate that maximizes the smallest user rate `r_c,m + R_m`:
/// equal shares for the fixed-split scheme, water-filling over the private rates otherwise.
pub fn canonical_split(scheme: MaScheme, common_rate: f64, private: &[f64]) -> Vec<f64> {
    let m = private.len();
    let psi = (common_rate * (1.0 - 1e-9)).max(0.0);
    match scheme {
        MaScheme::Rsma => vec![psi / m as f64; m],
        MaScheme::IRsma => {
            let mut sorted = private.to_vec();
            sorted.sort_by(f64::total_cmp);
            // Find the level L with Σ max(0, L − R_m) = ψ.
            let mut level = sorted[0] + psi;
            let mut acc = 0.0;
            for (i, &r) in sorted.iter().enumerate() {
                acc += r;
                let l = (psi + acc) / (i + 1) as f64;
                if i + 1 == m || l <= sorted[i + 1] {
                    level = l;
                    break;
                }
            }
            private.iter().map(|r| (level - r).max(0.0)).collect()
        }
        _ => vec![0.0; m],
    }
}

/// Variable handles of an assembled subproblem.
#[derive(Debug, Clone)]
pub struct Handles {
    pub streams: Vec<MatrixVar>,
    pub o: Vec<AffineExpr>,
    pub rate_split: Vec<AffineExpr>,
    pub private_rates: Vec<VarId>,
    pub min_rate: VarId,
    pub v: Vec<VarId>,
    pub w: Vec<VarId>,
    pub elastic: Vec<VarId>,
    pub epigraph: Option<VarId>,
    pub gamma_min: Option<VarId>,
}

impl Handles {
    pub fn read_iterate(&self, x: &[f64]) -> Iterate {
        let streams = self.streams.iter().map(|s| crate::linalg::hermitian_part(&s.value(x))).collect();
        Iterate {
            streams,
            o: self.o.iter().map(|e| e.eval(x)).collect(),
            rate_split: self.rate_split.iter().map(|e| e.eval(x).max(0.0)).collect(),
        }
    }

    pub fn elastic_total(&self, x: &[f64]) -> f64 {
        self.elastic.iter().map(|&i| x[i].max(0.0)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub problem: ConicSubproblem,
    pub handles: Handles,
    pub anchors: Vec<GeometricMeanTangent>,
}

/// Builds the convex subproblem around `state` (rate-constraint anchors come from realized traces).
pub fn assemble_subproblem(scenario: &Scenario, state: &ScaState, cfg: &SystemConfig) -> Result<Assembled, OptimizerError> {
    let k = scenario.targets.len();
    if k == 0 {
        return Err(OptimizerError::EmptyTargetSet);
    }
    let m_users = scenario.users.len();
    let scheme = state.scheme;
    let kinds = streams_of(scheme, m_users);
    let it = &state.iterate;
    if it.streams.len() != kinds.len() || it.o.len() != k {
        return Err(OptimizerError::DimensionMismatch(format!(
            "iterate has {} streams / {} weights, expected {} / {k}",
            it.streams.len(),
            it.o.len(),
            kinds.len()
        )));
    }
    let n = cfg.n_tx;
    let scaling = Scaling::new(cfg);
    let mut p = ConicSubproblem::new();
    let fixed = !state.fixed_directions.is_empty();

    // Stream variables.
    let streams: Vec<MatrixVar> = kinds
        .iter()
        .enumerate()
        .map(|(s, kind)| {
            let name = match kind {
                StreamKind::Common => "U_c".to_string(),
                StreamKind::Private(m) => format!("U_{m}"),
            };
            if fixed {
                p.add_fixed_direction(&name, &state.fixed_directions[s])
            } else {
                p.add_hermitian(&name, n, true)
            }
        })
        .collect();

    // Power budget.
    let weights = stream_weights(scheme, kinds.len(), m_users);
    let budget = 1.0 - POWER_MARGIN;
    if scheme == MaScheme::Oma {
        for (s, v) in streams.iter().enumerate() {
            p.le(format!("power[{s}]"), v.trace(), budget.into());
        }
    } else {
        p.le("power", sum_exprs(streams.iter().map(MatrixVar::trace)), budget.into());
    }

    // Rates.
    let private_rates: Vec<VarId> = (0..m_users).map(|m| p.add_scalar(format!("R_{m}"), VarRole::Other)).collect();
    let (rate_split, psi): (Vec<AffineExpr>, Option<AffineExpr>) = match scheme {
        MaScheme::IRsma => {
            let r: Vec<AffineExpr> = (0..m_users)
                .map(|m| {
                    let id = p.add_scalar(format!("r_c[{m}]"), VarRole::Other);
                    p.ge(format!("r_c[{m}]>=0"), AffineExpr::var(id));
                    AffineExpr::var(id)
                })
                .collect();
            let psi = sum_exprs(r.iter().cloned());
            (r, Some(psi))
        }
        MaScheme::Rsma => {
            let id = p.add_scalar("psi", VarRole::Other);
            p.ge("psi>=0", AffineExpr::var(id));
            let share = AffineExpr::var(id) * (1.0 / m_users as f64);
            (vec![share; m_users], Some(AffineExpr::var(id)))
        }
        _ => (vec![AffineExpr::constant(0.0); m_users], None),
    };
    let t = p.add_scalar("t", VarRole::Other);
    for m in 0..m_users {
        p.le(format!("t<=rate[{m}]"), AffineExpr::var(t), rate_split[m].clone() + AffineExpr::var(private_rates[m]));
    }
    p.ge("t>=R0", AffineExpr::var(t) - cfg.rate_user_min * (1.0 + RATE_MARGIN));

    let grams = grams(scenario, &scaling);
    let reqs = requirements(scenario, cfg, scheme, &kinds);
    let grow = 1.0 + RATE_MARGIN;
    let mut anchors = Vec::with_capacity(reqs.len());
    let mut elastic = vec![];
    for req in &reqs {
        let (g_sig, g_int) = &grams[req.listener];
        let signal = streams[req.signal].trace_with(g_sig);
        let interference = sum_exprs(req.interference.iter().map(|&j| streams[j].trace_with(g_int))) + 1.0;
        let sig_val = re_trace_product(g_sig, &it.streams[req.signal]).max(0.0);
        let int_val: f64 = req.interference.iter().map(|&j| re_trace_product(g_int, &it.streams[j]).max(0.0)).sum::<f64>() + 1.0;
        let c2_0 = grow * int_val;
        let c1_0 = (sig_val / c2_0).max(1e-6);
        let anchor = GeometricMeanTangent::new(c1_0, c2_0)?;
        anchors.push(anchor);
        let xi = if state.phase == Phase::Feasibility {
            let id = p.add_scalar(format!("xi[{}:{:?}]", req.label, req.kind), VarRole::Other);
            p.ge(format!("xi>=0[{}]", req.label), AffineExpr::var(id));
            elastic.push(id);
            Some(id)
        } else {
            None
        };
        let link = req.link.map(|(r, f)| {
            let e = match r {
                RateRef::Split => psi.clone().expect("split rate exists for rate-splitting schemes"),
                RateRef::Private(m) => AffineExpr::var(private_rates[m]),
            };
            (e, f)
        });
        let spec = RateConstraintSpec {
            label: req.label.clone(),
            signal,
            interference_plus_noise: interference,
            target: SinrTarget { min_sinr: req.min_sinr.map(|x| x * grow), rate_link: link },
            anchor,
            elastic: xi,
            margin: RATE_MARGIN,
        };
        linearize_rate_constraint(&mut p, req.kind, &spec);
    }

    let mut handles = Handles {
        streams: streams.clone(),
        o: vec![],
        rate_split,
        private_rates,
        min_rate: t,
        v: vec![],
        w: vec![],
        elastic,
        epigraph: None,
        gamma_min: None,
    };

    if state.phase == Phase::Feasibility {
        handles.o = it.o.iter().map(|&x| AffineExpr::constant(x)).collect();
        let total = sum_exprs(handles.elastic.iter().map(|&i| AffineExpr::var(i)));
        p.minimize(total);
        return Ok(Assembled { problem: p, handles, anchors });
    }

    // Sensing. Every CRB quantity is scaled by its value at the current iterate:
    // w_i = w0_i·w̃_i, v_i = v0_i·ṽ_i, o_k = o0_k·õ_k, and the FIM is Jacobi-scaled.
    let d = 3 * k;
    let o_now = &it.o;
    let r_now = iterate_covariance(scheme, it, m_users);
    let f_now = normalized_fim(scenario, cfg, &r_now);
    let jacobi: Vec<f64> = (0..d).map(|i| if f_now[(i, i)] > 0.0 { f_now[(i, i)].sqrt().recip() } else { 1.0 }).collect();
    let w0: Vec<f64> = normalized_crb_diag(scenario, cfg, &r_now)
        .filter(|c| c.iter().all(|x| x.is_finite() && *x > 0.0))
        .unwrap_or_else(|| jacobi.iter().map(|x| x * x).collect());
    let o0: Vec<f64> = o_now.iter().map(|x| x.max(1e-9)).collect();
    let v0: Vec<f64> = (0..d).map(|i| w0[i] / o0[i % k]).collect();

    let unit_targets = scenario.targets.with_power_weights(&vec![1.0; k]);
    let mut fim_entries = vec![AffineExpr::default(); d * d];
    for (s, var) in streams.iter().enumerate() {
        for (q, b) in var.basis.iter().enumerate() {
            let f = fim_matrix(&unit_targets, b, cfg.n_blocks, cfg.noise_power) * (weights[s] / scaling.kappa);
            for i in 0..d {
                for j in 0..d {
                    let val = 0.5 * (f[(i, j)] + f[(j, i)]) * (jacobi[i] * jacobi[j]);
                    if val != 0.0 {
                        fim_entries[i * d + j].add_term(var.coord(q), val);
                    }
                }
            }
        }
    }
    let fim_affine = FimAffine { dim: d, entries: fim_entries };
    let w: Vec<VarId> = (0..d).map(|i| p.add_scalar(format!("w[{i}]"), VarRole::Other)).collect();
    let w_exprs: Vec<AffineExpr> = w.iter().map(|&i| AffineExpr::var(i)).collect();
    let border: Vec<f64> = (0..d).map(|i| jacobi[i] / w0[i].sqrt()).collect();
    for l in build_schur_lmi_scaled(&fim_affine, &w_exprs, k, &border)? {
        p.lmi(l.label, l.dim, l.entries);
    }
    let v: Vec<VarId> = (0..d).map(|i| p.add_scalar(format!("v[{i}]"), VarRole::CrbBound)).collect();

    // Sensing power weights.
    let gu = gamma_unit(scenario, cfg);
    let o: Vec<AffineExpr> = match state.policy {
        PowerPolicy::EqualityAware => vec![AffineExpr::constant(1.0 / k as f64); k],
        PowerPolicy::FairnessAware => {
            let ids: Vec<VarId> = (0..k).map(|i| p.add_scalar(format!("o[{i}]"), VarRole::Other)).collect();
            let g = p.add_scalar("gamma_min", VarRole::Other);
            handles.gamma_min = Some(g);
            p.ge("gamma_min>=floor", AffineExpr::var(g) - gamma_floor(&gu));
            let o: Vec<AffineExpr> = ids.iter().map(|&i| AffineExpr::var(i)).collect();
            let rho = cfg.scnr_gap_tol * (1.0 - RATE_MARGIN);
            for lc in fairness_power_bounds(&AffineExpr::var(g), rho, &gu, &o) {
                p.ge(lc.label, lc.expr);
            }
            for (i, oi) in o.iter().enumerate() {
                p.le(format!("o[{i}]<=1"), oi.clone(), 1.0.into());
            }
            p.le("sum_o<=1", sum_exprs(o.iter().cloned()), 1.0.into());
            o
        }
    };

    // ṽ_i·õ_k ≥ w̃_i, convexified around ṽ = õ = 1 as w̃ + (ṽ−õ)²/4 ≤ ṽ + õ − 1.
    for i in 0..d {
        let tk = i % k;
        let vi = AffineExpr::var(v[i]);
        let wi = AffineExpr::var(w[i]);
        match state.policy {
            PowerPolicy::EqualityAware => p.ge(format!("crb[{i}]"), vi - wi),
            PowerPolicy::FairnessAware => {
                let oi = o[tk].clone() * (1.0 / o0[tk]);
                let y = vi.clone() + oi.clone() - 1.0 - wi;
                p.soc(format!("crb[{i}]"), y.clone() + 1.0, vec![vi - oi, y - 1.0]);
            }
        }
    }

    // Penalized epigraph objective.
    let a = p.add_scalar("a", VarRole::Epigraph);
    let lambda1 = cfg.weight_sensing / state.crb_ref;
    let v_exprs: Vec<AffineExpr> = v.iter().zip(&v0).map(|(&i, &s)| AffineExpr::term(i, s)).collect();
    let penalized: Vec<(&MatrixVar, &CVec, f64)> = if fixed {
        vec![]
    } else {
        streams
            .iter()
            .zip(&kinds)
            .zip(&state.bf_anchor)
            .map(|((var, kind), anchor)| (var, anchor, state.penalty_for(*kind)))
            .collect()
    };
    let epi = penalty_objective(&AffineExpr::var(a), &v_exprs, &penalized, lambda1) + AffineExpr::var(t) * cfg.weight_comm;
    p.ge("epigraph", epi);
    p.minimize(AffineExpr::var(a));

    handles.o = o;
    handles.v = v;
    handles.w = w;
    handles.epigraph = Some(a);
    Ok(Assembled { problem: p, handles, anchors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::zf::zero_forcing_init;
    use crate::scenario::{build_scenario, default_target_angles, default_user_angles};

    fn state_for(s: &Scenario, scheme: MaScheme, phase: Phase) -> ScaState {
        let cfg = &s.config;
        let bf = zero_forcing_init(s).unwrap();
        let mut streams: Vec<CMat> = bf.lifted_private.iter().map(|u| u / c(cfg.p_max, 0.0)).collect();
        if scheme.has_common_stream() {
            streams.insert(0, &bf.lifted_common / c(cfg.p_max, 0.0));
        }
        let gu = gamma_unit(s, cfg);
        let it = Iterate { streams, o: initial_power_weights(PowerPolicy::FairnessAware, &gu), rate_split: vec![0.0; cfg.n_users] };
        let mut st = ScaState::new(scheme, PowerPolicy::FairnessAware, it, cfg, 1.0);
        st.phase = phase;
        st
    }

    fn scenario(cfg: &SystemConfig) -> Scenario {
        let t = default_target_angles(cfg.n_targets);
        let u = default_user_angles(cfg.n_users, &t);
        build_scenario(cfg, &u, &t, 1).unwrap()
    }

    #[test]
    fn full_size_slack_count() {
        let s = scenario(&SystemConfig::paper());
        let asm = assemble_subproblem(&s, &state_for(&s, MaScheme::IRsma, Phase::Main), &s.config).unwrap();
        // split and common-QoS rows carry two rate slacks per user; fixed private floors none
        assert_eq!(asm.problem.slack_count(), 4 * 4 + 3 * 2 + 1);
        assert!(asm.problem.references_valid());
        assert!(asm.problem.lmi_constraints.iter().all(|l| l.is_symmetric()));
    }

    #[test]
    fn single_target_has_three_schur_lmis() {
        let mut cfg = SystemConfig::desk();
        cfg.n_targets = 1;
        let s = scenario(&cfg);
        let asm = assemble_subproblem(&s, &state_for(&s, MaScheme::Rsma, Phase::Main), &cfg).unwrap();
        let schur: Vec<_> = asm.problem.lmi_constraints.iter().filter(|l| l.label.starts_with("schur")).collect();
        assert_eq!(schur.len(), 3);
        assert!(schur.iter().all(|l| l.dim == 4));
    }

    #[test]
    fn empty_target_set_rejected() {
        let s = scenario(&SystemConfig::desk());
        let mut s2 = s.clone();
        s2.targets = crate::scenario::TargetSet::new(&[], CVec::zeros(0), 4, 4, 0.5);
        let mut st = state_for(&s, MaScheme::Rsma, Phase::Main);
        st.iterate.o = vec![];
        assert!(matches!(assemble_subproblem(&s2, &st, &s.config), Err(OptimizerError::EmptyTargetSet)));
    }

    #[test]
    fn water_filling_split() {
        let r = canonical_split(MaScheme::IRsma, 1.0, &[1.0, 3.0]);
        assert!((r[0] - 1.0).abs() < 1e-8 && r[1] == 0.0);
        let r = canonical_split(MaScheme::IRsma, 3.0, &[1.0, 2.0]);
        assert!((r[0] - 2.0).abs() < 1e-8 && (r[1] - 1.0).abs() < 1e-8);
        assert_eq!(canonical_split(MaScheme::Sdma, 3.0, &[1.0, 2.0]), vec![0.0, 0.0]);
        let r = canonical_split(MaScheme::Rsma, 2.0, &[1.0, 5.0]);
        assert!((r[0] - 1.0).abs() < 1e-8 && (r[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn debug_dump_lists_constraints() {
        let s = scenario(&SystemConfig::desk());
        let asm = assemble_subproblem(&s, &state_for(&s, MaScheme::Sdma, Phase::Feasibility), &s.config).unwrap();
        let dump = asm.problem.to_string();
        assert!(dump.contains("power"));
        assert!(dump.contains("tangent"));
    }
}
