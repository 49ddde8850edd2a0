//! Exponent bookkeeping of the `H(q, l)` bootstrap: increments `θ_l`, the upgrade
//! schedule, the dyadic decay factor `𝔑(δ)`, the `R(i0)` geometry classifier and the
//! dyadic box decomposition.

mod boxes;
mod cases;

pub use boxes::{box_count, box_index, box_partition_check, enumerate_boxes, BoxCheckReport, BoxIndex};
pub use cases::{
    check_case_inequalities, random_case_sweep, theta_i0, CaseConfig, CaseKind, CaseReport, CaseSweep,
    SWEEP_MAX_DIM, SWEEP_MAX_SCALE,
};

use serde::{Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::scaling::ScalingFunction;

/// Comparison slack for exponent thresholds.
const EXPONENT_TOL: f64 = 1e-12;
/// Relative slack for the `𝔑` bounds.
const BOUND_TOL: f64 = 1e-9;
/// Guard against a schedule that fails to terminate.
const MAX_SCHEDULE_STEPS: usize = 10_000;

pub(crate) fn check_exponents(alpha_lower: f64, alpha_upper: f64) -> Result<()> {
    if !(alpha_lower > 0.0 && alpha_lower <= alpha_upper && alpha_upper < 2.0) {
        return Err(domain(format!(
            "exponents must satisfy 0 < alpha_lower <= alpha_upper < 2, got ({alpha_lower}, {alpha_upper})"
        )));
    }
    Ok(())
}

/// Increments and step counts of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaTable {
    pub d: usize,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    /// `θ_l` for `l = 0, ..., d - 1`.
    pub theta: Vec<f64>,
    /// `N_l = inf{n >= 1 : n θ_l >= 1 / (1 + α̲)}`.
    pub steps: Vec<u64>,
    pub b0: f64,
    pub k0: f64,
}

impl ThetaTable {
    /// Exponent threshold `1 / (1 + α̲)` separating upgrades from level changes.
    pub fn threshold(&self) -> f64 {
        1.0 / (1.0 + self.alpha_lower)
    }
}

/// `θ_l = α̲/(2+α̲+ᾱ) · (Σ_{i=1}^{d-l-1} ((ᾱ+1)/α̲)^i)^{-1}` for `l <= d - 2`, `θ_{d-1} = α̲/(α̲+1)`.
pub fn theta(d: usize, alpha_lower: f64, alpha_upper: f64) -> Result<ThetaTable> {
    check_exponents(alpha_lower, alpha_upper)?;
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    let theta: Vec<f64> = (0..d).map(|l| theta_i0(d, l, 1, alpha_lower, alpha_upper)).collect::<Result<_>>()?;
    let threshold = 1.0 / (1.0 + alpha_lower);
    let steps = theta
        .iter()
        .map(|&th| ((threshold / th) - EXPONENT_TOL).ceil().max(1.0) as u64)
        .collect();
    Ok(ThetaTable {
        d,
        alpha_lower,
        alpha_upper,
        theta,
        steps,
        b0: alpha_lower / (alpha_lower + 1.0),
        k0: (alpha_lower + 1.0) / (alpha_upper + 1.0),
    })
}

/// Established partial estimate `H(q, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderState {
    pub q: f64,
    pub l: usize,
}

/// Which lemma turns one state into the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `H(q, l) -> H(q + θ_l, l)` for `q` below the threshold.
    Upgrade,
    /// `H(q, l) -> H(0, l + 1)` for `q` above the threshold, `l <= d - 2`.
    LevelUp,
    /// `H(q, d - 1) -> H(1, d - 1)` for `q` above the threshold.
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: LadderState,
    pub to: LadderState,
    pub rule: Rule,
}

/// Upgrade schedule from `H(0, 0)` to `H(1, d - 1)`.
///
/// Within a level `q` advances in exact multiples of `θ_l`. A state landing on the
/// threshold `1/(1+α̲)` is followed by one more upgrade, since neither open-interval
/// hypothesis covers it.
pub fn ladder_schedule(d: usize, alpha_lower: f64, alpha_upper: f64) -> Result<Vec<Transition>> {
    let table = theta(d, alpha_lower, alpha_upper)?;
    let threshold = table.threshold();
    let mut out = Vec::new();
    let mut state = LadderState { q: 0.0, l: 0 };
    let mut n = 0u64;
    loop {
        if out.len() >= MAX_SCHEDULE_STEPS {
            return Err(Error::Internal(format!("ladder schedule exceeded {MAX_SCHEDULE_STEPS} steps")));
        }
        let l = state.l;
        let crossed = state.q > threshold + EXPONENT_TOL;
        let (to, rule) = if !crossed {
            n += 1;
            let q = (n as f64 * table.theta[l]).min(1.0);
            let q = if l + 1 == d && q >= 1.0 - EXPONENT_TOL { 1.0 } else { q };
            (LadderState { q, l }, Rule::Upgrade)
        } else if l + 1 < d {
            n = 0;
            (LadderState { q: 0.0, l: l + 1 }, Rule::LevelUp)
        } else {
            (LadderState { q: 1.0, l }, Rule::Finish)
        };
        out.push(Transition { from: state, to, rule });
        state = to;
        if state.l + 1 == d && state.q == 1.0 {
            return Ok(out);
        }
    }
}

/// `𝔑(δ) = φ(κ) / (2^δ φ(2^δ κ))`.
pub fn frak_n(delta: i64, kappa: f64, phi: &ScalingFunction) -> Result<f64> {
    Ok(log_frak_n(delta, kappa, phi)?.exp())
}

pub(crate) fn log_frak_n(delta: i64, kappa: f64, phi: &ScalingFunction) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(domain(format!("kappa must be positive, got {kappa}")));
    }
    let scale = (delta as f64).exp2();
    Ok(phi.eval(kappa)?.ln() - scale.ln() - phi.eval(scale * kappa)?.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrakNViolation {
    pub delta: i64,
    pub kappa: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Scan of `c^{-1} 2^{-δ(ᾱ+1)} <= 𝔑(δ) <= c 2^{-δ(α̲+1)}` with `c = C̄ / c̲`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrakNReport {
    pub c: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub checked: usize,
    /// Smallest `ln(𝔑 / lower bound)` over the scan.
    pub worst_lower_slack: f64,
    /// Smallest `ln(upper bound / 𝔑)` over the scan.
    pub worst_upper_slack: f64,
    pub violations: Vec<FrakNViolation>,
    pub holds: bool,
}

pub fn frak_n_bounds_check(phi: &ScalingFunction, kappas: &[f64], delta_max: u32) -> Result<FrakNReport> {
    let cert = phi.certificate();
    let c = cert.c_upper / cert.c_lower;
    let (lo, hi) = (cert.alpha_lower, cert.alpha_upper);
    let ln2 = std::f64::consts::LN_2;
    let mut report = FrakNReport {
        c,
        alpha_lower: lo,
        alpha_upper: hi,
        checked: 0,
        worst_lower_slack: f64::INFINITY,
        worst_upper_slack: f64::INFINITY,
        violations: Vec::new(),
        holds: true,
    };
    for &kappa in kappas {
        for delta in 0..=i64::from(delta_max) {
            let value = log_frak_n(delta, kappa, phi)?;
            let lower = -c.ln() - delta as f64 * (hi + 1.0) * ln2;
            let upper = c.ln() - delta as f64 * (lo + 1.0) * ln2;
            let lower_slack = value - lower;
            let upper_slack = upper - value;
            report.checked += 1;
            report.worst_lower_slack = report.worst_lower_slack.min(lower_slack);
            report.worst_upper_slack = report.worst_upper_slack.min(upper_slack);
            if lower_slack < -BOUND_TOL || upper_slack < -BOUND_TOL {
                report.violations.push(FrakNViolation {
                    delta,
                    kappa,
                    value: value.exp(),
                    lower: lower.exp(),
                    upper: upper.exp(),
                });
            }
        }
    }
    report.holds = report.violations.is_empty();
    Ok(report)
}

/// Dyadic scale index `n_i`, with `-∞` for a coordinate with zero separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScaleIndex {
    NegInfinity,
    Finite(i64),
}

impl Serialize for ScaleIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ScaleIndex::NegInfinity => serializer.serialize_str("-inf"),
            ScaleIndex::Finite(n) => serializer.serialize_i64(*n),
        }
    }
}

/// Dyadic geometry of a point pair at time scale `κ = φ^{-1}(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryContext {
    pub t: f64,
    pub kappa: f64,
    /// Original axes sorted by increasing `|x0^i - y0^i|`.
    pub order: Vec<usize>,
    /// Scale indices in sorted order; nondecreasing.
    pub n: Vec<ScaleIndex>,
    /// `R_i = 2^{n_i} κ` in sorted order; 0 for `n_i = -∞`.
    pub radii: Vec<f64>,
    /// 1-based index of the first sorted axis with `n_i >= 1`, or `d + 1`.
    pub i0: usize,
}

/// Unique `n` with `(5/4) 2^n κ <= gap < (10/4) 2^n κ`.
pub(crate) fn dyadic_bracket(gap: f64, kappa: f64) -> i64 {
    let mut n = (4.0 * gap / (5.0 * kappa)).log2().floor() as i64;
    let lower = |n: i64| 1.25 * (n as f64).exp2() * kappa;
    while lower(n) > gap {
        n -= 1;
    }
    while 2.0 * lower(n) <= gap {
        n += 1;
    }
    n
}

pub fn geometry_context(x0: &[f64], y0: &[f64], t: f64, phi: &ScalingFunction) -> Result<GeometryContext> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("time must be positive, got {t}")));
    }
    if x0.len() != y0.len() || x0.is_empty() {
        return Err(domain(format!("point dimensions differ: {} vs {}", x0.len(), y0.len())));
    }
    let kappa = phi.inverse(t)?;
    let gaps: Vec<f64> = x0.iter().zip(y0).map(|(a, b)| (a - b).abs()).collect();
    if gaps.iter().any(|g| !g.is_finite()) {
        return Err(domain("points have non-finite coordinates"));
    }
    let mut order: Vec<usize> = (0..gaps.len()).collect();
    order.sort_by(|&a, &b| gaps[a].total_cmp(&gaps[b]).then(a.cmp(&b)));
    let n: Vec<ScaleIndex> = order
        .iter()
        .map(|&i| if gaps[i] > 0.0 { ScaleIndex::Finite(dyadic_bracket(gaps[i], kappa)) } else { ScaleIndex::NegInfinity })
        .collect();
    let radii = n
        .iter()
        .map(|s| match s {
            ScaleIndex::Finite(k) => (*k as f64).exp2() * kappa,
            ScaleIndex::NegInfinity => 0.0,
        })
        .collect();
    let i0 = n.iter().position(|&s| s >= ScaleIndex::Finite(1)).map_or(n.len() + 1, |p| p + 1);
    Ok(GeometryContext { t, kappa, order, n, radii, i0 })
}
