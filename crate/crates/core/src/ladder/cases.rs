//! Exponent inequalities behind one upgrade step `H(q, l) -> H(q + θ_l^{i0}, l)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_exponents, log_frak_n};
use crate::error::{domain, Result};
use crate::scaling::{PowerTerm, ScalingFunction};

/// `θ_l^{i0}`: `α̲/(α̲+1)` for `i0 = d - l`, otherwise
/// `α̲/(2+α̲+ᾱ) · (Σ_{i=1}^{d-l-i0} ((ᾱ+1)/α̲)^i)^{-1}`.
pub fn theta_i0(d: usize, l: usize, i0: usize, alpha_lower: f64, alpha_upper: f64) -> Result<f64> {
    check_exponents(alpha_lower, alpha_upper)?;
    if l >= d || i0 == 0 || i0 > d - l {
        return Err(domain(format!("need l < d and 1 <= i0 <= d - l, got d={d}, l={l}, i0={i0}")));
    }
    let b0 = alpha_lower / (alpha_lower + 1.0);
    if i0 == d - l {
        return Ok(b0);
    }
    let ratio = (alpha_upper + 1.0) / alpha_lower;
    let sum: f64 = (1..=(d - l - i0)).map(|i| ratio.powi(i as i32)).sum();
    Ok(alpha_lower / (2.0 + alpha_lower + alpha_upper) / sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseKind {
    /// Some `j0 < d - l` satisfies the threshold condition on `θ_l^{i0}`.
    #[serde(rename = "I")]
    I,
    /// No such `j0`; the estimate uses `j0 = d - l`.
    #[serde(rename = "II")]
    II,
}

/// Evaluation of the applicable case for one configuration.
///
/// `g_partial` and `f_partial` omit the common factor `Π_{j>d-l} 𝔑(n_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: CaseKind,
    pub theta: f64,
    /// 1-based index selected by the case analysis.
    pub j0: usize,
    /// `G_{j0}`: `𝔑(n_{j0})^{b0+q} Π_{j0<j<=d-l} 𝔑(n_j)^q`.
    pub g_partial: f64,
    /// `F_{j0}`: `Π_{j0<=j<=d-l} 𝔑(n_j)^q`.
    pub f_partial: f64,
    pub lhs: f64,
    /// `Π_{i0<=j<=d-l} 𝔑(n_j)^{q+θ}`.
    pub rhs: f64,
    /// `(C̄/c̲)^d`.
    pub c: f64,
    /// `c · rhs / lhs`; at least 1 when the inequality holds.
    pub margin: f64,
    /// Base-2 exponent margin of the dyadic bound behind the case; nonnegative when the
    /// case argument applies.
    pub exponent_slack: f64,
    pub holds: bool,
}

/// Checks `G_{j0} <= c Π 𝔑(n_j)^{q+θ_l^{i0}}` for the case selected by the configuration.
///
/// `n` lists `n_{i0}, ..., n_{d-l}`: positive, nondecreasing.
#[allow(clippy::too_many_arguments)]
pub fn check_case_inequalities(
    d: usize,
    l: usize,
    i0: usize,
    alpha_lower: f64,
    alpha_upper: f64,
    q: f64,
    n: &[i64],
    kappa: f64,
    phi: &ScalingFunction,
) -> Result<CaseReport> {
    let theta = theta_i0(d, l, i0, alpha_lower, alpha_upper)?;
    let top = d - l;
    if n.len() != top - i0 + 1 {
        return Err(domain(format!("expected {} scale indices for i0={i0}..{top}, got {}", top - i0 + 1, n.len())));
    }
    if n[0] < 1 || n.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain(format!("scale indices must be positive and nondecreasing, got {n:?}")));
    }
    let threshold = 1.0 / (1.0 + alpha_lower);
    if !(q >= 0.0 && q < threshold) {
        return Err(domain(format!("exponent q={q} outside [0, {threshold})")));
    }
    let b0 = alpha_lower / (alpha_lower + 1.0);
    let (lo1, hi1) = (alpha_lower + 1.0, alpha_upper + 1.0);
    // Position p in `n` corresponds to the 1-based index i0 + p.
    let at = |j: usize| n[j - i0] as f64;
    let partial = |a: usize, b: usize| if a <= b { (a..=b).map(at).sum() } else { 0.0 };
    let total = partial(i0, top);

    let case_one = (i0..top).find(|&j0| theta <= (at(j0) * lo1 * b0 - hi1 * partial(i0, j0 - 1) * q) / (hi1 * total));
    let (case, j0) = match case_one {
        Some(j0) => (CaseKind::I, j0),
        None => (CaseKind::II, top),
    };

    let log_n: Vec<f64> = n.iter().map(|&k| log_frak_n(k, kappa, phi)).collect::<Result<_>>()?;
    let ln = |j: usize| log_n[j - i0];
    let log_f: f64 = (j0..=top).map(|j| q * ln(j)).sum();
    let log_g = (b0 + q) * ln(j0) + ((j0 + 1)..=top).map(|j| q * ln(j)).sum::<f64>();
    let log_rhs: f64 = (i0..=top).map(|j| (q + theta) * ln(j)).sum();
    let cert = phi.certificate();
    let log_c = d as f64 * (cert.c_upper / cert.c_lower).ln();
    let log_margin = log_c + log_rhs - log_g;

    let exponent_slack = match case {
        CaseKind::I => at(j0) * lo1 * b0 - hi1 * partial(i0, j0 - 1) * q - hi1 * total * theta,
        CaseKind::II => -hi1 * partial(i0, top - 1) * (q + theta) + lo1 * at(top) * (b0 - theta),
    };

    Ok(CaseReport {
        case,
        theta,
        j0,
        g_partial: log_g.exp(),
        f_partial: log_f.exp(),
        lhs: log_g.exp(),
        rhs: log_rhs.exp(),
        c: log_c.exp(),
        margin: log_margin.exp(),
        exponent_slack,
        holds: log_margin >= -1e-12,
    })
}

/// One failing configuration of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseConfig {
    pub d: usize,
    pub l: usize,
    pub i0: usize,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub q: f64,
    pub n: Vec<i64>,
    pub kappa: f64,
    pub margin: f64,
}

/// Outcome of a randomized sweep of [`check_case_inequalities`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSweep {
    pub checked: u64,
    pub case_one: u64,
    pub case_two: u64,
    pub min_margin: f64,
    pub min_exponent_slack: f64,
    pub violations: Vec<CaseConfig>,
}

/// Largest dimension drawn by [`random_case_sweep`].
pub const SWEEP_MAX_DIM: usize = 4;
/// Largest scale index drawn by [`random_case_sweep`].
pub const SWEEP_MAX_SCALE: i64 = 20;
const SWEEP_Q_GRID: u32 = 8;

/// Checks `count` random configurations: `d <= 4`, `n_j <= 20`, `q` on a grid in
/// `[0, 1/(1+α̲))`, and φ a power law or a two-term sum of powers with an exact certificate.
pub fn random_case_sweep(count: u64, seed: u64) -> Result<CaseSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweep = CaseSweep {
        checked: 0,
        case_one: 0,
        case_two: 0,
        min_margin: f64::INFINITY,
        min_exponent_slack: f64::INFINITY,
        violations: Vec::new(),
    };
    for _ in 0..count {
        let d = rng.random_range(1..=SWEEP_MAX_DIM);
        let l = rng.random_range(0..d);
        let i0 = rng.random_range(1..=d - l);
        let alpha_lower: f64 = rng.random_range(0.1..1.9);
        let alpha_upper = if rng.random_bool(0.3) { alpha_lower } else { rng.random_range(alpha_lower..1.95) };
        let phi = if alpha_lower == alpha_upper {
            ScalingFunction::power_law(alpha_lower, rng.random_range(0.5..2.0))?
        } else {
            ScalingFunction::sum_of_powers(vec![
                PowerTerm { c: rng.random_range(0.1..10.0), alpha: alpha_lower },
                PowerTerm { c: rng.random_range(0.1..10.0), alpha: alpha_upper },
            ])?
        };
        let threshold = 1.0 / (1.0 + alpha_lower);
        let q = threshold * f64::from(rng.random_range(0..SWEEP_Q_GRID)) / f64::from(SWEEP_Q_GRID);
        let mut n: Vec<i64> = (0..(d - l - i0 + 1)).map(|_| rng.random_range(1..=SWEEP_MAX_SCALE)).collect();
        n.sort_unstable();
        let kappa = [1e-3, 1.0, 1e3][rng.random_range(0..3)];
        let report = check_case_inequalities(d, l, i0, alpha_lower, alpha_upper, q, &n, kappa, &phi)?;
        sweep.checked += 1;
        match report.case {
            CaseKind::I => sweep.case_one += 1,
            CaseKind::II => sweep.case_two += 1,
        }
        sweep.min_margin = sweep.min_margin.min(report.margin);
        sweep.min_exponent_slack = sweep.min_exponent_slack.min(report.exponent_slack);
        if !report.holds {
            sweep.violations.push(CaseConfig {
                d,
                l,
                i0,
                alpha_lower,
                alpha_upper,
                q,
                n,
                kappa,
                margin: report.margin,
            });
        }
    }
    Ok(sweep)
}
