//! Weak-scaling functions φ and the one-dimensional jump calculus built on them.
//!
//! A [`ScalingFunction`] pairs a concrete family with its weak-scaling certificate
//! `c_lower (R/r)^alpha_lower <= φ(R)/φ(r) <= c_upper (R/r)^alpha_upper`.
//! The jump intensity of each coordinate is `nu1(r) = 1 / (r φ(r))`.

use std::fmt;
use std::path::Path;

use crate::error::{domain, numeric, Result};
use crate::quad;

/// One term `c · h^(-1-alpha)` of a sum-of-powers jump density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub c: f64,
    pub alpha: f64,
}

/// Log-log piecewise linear table with power-law extrapolation beyond both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    log_r: Vec<f64>,
    log_phi: Vec<f64>,
    slopes: Vec<f64>,
}

impl Table {
    fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(domain("table needs at least two points"));
        }
        let mut log_r = Vec::with_capacity(points.len());
        let mut log_phi = Vec::with_capacity(points.len());
        for &(r, v) in points {
            if !(r > 0.0 && v > 0.0 && r.is_finite() && v.is_finite()) {
                return Err(domain(format!("table entry ({r}, {v}) must be positive and finite")));
            }
            log_r.push(r.ln());
            log_phi.push(v.ln());
        }
        let slopes: Vec<f64> = (1..points.len())
            .map(|k| (log_phi[k] - log_phi[k - 1]) / (log_r[k] - log_r[k - 1]))
            .collect();
        for k in 1..points.len() {
            if log_r[k] <= log_r[k - 1] || log_phi[k] <= log_phi[k - 1] {
                return Err(domain("table must be strictly increasing in r and φ(r)"));
            }
        }
        for &s in &slopes {
            if !(s > 0.0 && s < 2.0) {
                return Err(domain(format!("table log-log slope {s} outside (0, 2)")));
            }
        }
        Ok(Self { log_r, log_phi, slopes })
    }

    fn segment(&self, lr: f64) -> usize {
        let last = self.slopes.len() - 1;
        match self.log_r.partition_point(|&x| x <= lr) {
            0 => 0,
            p => (p - 1).min(last),
        }
    }

    fn log_eval(&self, lr: f64) -> f64 {
        let k = self.segment(lr);
        self.log_phi[k] + self.slopes[k] * (lr - self.log_r[k])
    }

    fn slope_at(&self, lr: f64) -> f64 {
        self.slopes[self.segment(lr)]
    }

    fn slope_range(&self) -> (f64, f64) {
        let lo = self.slopes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Grid points `(r, φ(r))`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.log_r
            .iter()
            .zip(&self.log_phi)
            .map(|(a, b)| (a.exp(), b.exp()))
            .collect()
    }
}

/// Concrete family of a scaling function.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `φ(r) = scale · r^alpha`.
    PowerLaw { alpha: f64, scale: f64 },
    /// `φ(h) = 1 / Σ c_k h^(-alpha_k)`.
    SumOfPowers(Vec<PowerTerm>),
    /// Log-log interpolated table.
    Tabulated(Table),
}

/// Weak-scaling certificate `(alpha_lower, alpha_upper, c_lower, c_upper)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub c_lower: f64,
    pub c_upper: f64,
}

impl Certificate {
    pub fn validate(&self) -> Result<()> {
        let Certificate { alpha_lower: lo, alpha_upper: hi, c_lower, c_upper } = *self;
        if !(lo > 0.0 && lo < 2.0 && hi > 0.0 && hi < 2.0) {
            return Err(domain(format!("scaling exponents ({lo}, {hi}) must lie in (0, 2)")));
        }
        if lo > hi {
            return Err(domain(format!("alpha_lower {lo} exceeds alpha_upper {hi}")));
        }
        if !(c_lower > 0.0 && c_lower <= 1.0) {
            return Err(domain(format!("c_lower {c_lower} must lie in (0, 1]")));
        }
        if !(c_upper >= 1.0 && c_upper.is_finite()) {
            return Err(domain(format!("c_upper {c_upper} must lie in [1, ∞)")));
        }
        Ok(())
    }

    /// Constant `c_upper / c_lower` used in the dyadic decay bounds.
    pub fn spread(&self) -> f64 {
        self.c_upper / self.c_lower
    }
}

/// An increasing function φ with a weak-scaling certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFunction {
    family: Family,
    certificate: Certificate,
}

impl ScalingFunction {
    /// `scale · r^alpha`, certified exactly with `c_lower = c_upper = 1`.
    pub fn power_law(alpha: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain(format!("power-law scale {scale} must be positive")));
        }
        let certificate = Certificate { alpha_lower: alpha, alpha_upper: alpha, c_lower: 1.0, c_upper: 1.0 };
        certificate.validate()?;
        Ok(Self { family: Family::PowerLaw { alpha, scale }, certificate })
    }

    /// Sum of power terms; the certificate is `(min alpha_k, max alpha_k, 1, 1)`.
    pub fn sum_of_powers(terms: Vec<PowerTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(domain("sum of powers needs at least one term"));
        }
        for t in &terms {
            if !(t.c > 0.0 && t.c.is_finite()) {
                return Err(domain(format!("coefficient {} must be positive", t.c)));
            }
        }
        let lo = terms.iter().map(|t| t.alpha).fold(f64::INFINITY, f64::min);
        let hi = terms.iter().map(|t| t.alpha).fold(f64::NEG_INFINITY, f64::max);
        let certificate = Certificate { alpha_lower: lo, alpha_upper: hi, c_lower: 1.0, c_upper: 1.0 };
        certificate.validate()?;
        Ok(Self { family: Family::SumOfPowers(terms), certificate })
    }

    /// Table of `(r, φ(r))`; the certificate is the range of log-log slopes with unit constants.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        let table = Table::new(points)?;
        let (lo, hi) = table.slope_range();
        let certificate = Certificate { alpha_lower: lo, alpha_upper: hi, c_lower: 1.0, c_upper: 1.0 };
        certificate.validate()?;
        Ok(Self { family: Family::Tabulated(table), certificate })
    }

    /// Replaces the certificate with a user-declared one (not checked against the family).
    pub fn with_certificate(mut self, certificate: Certificate) -> Result<Self> {
        certificate.validate()?;
        self.certificate = certificate;
        Ok(self)
    }

    /// Parses `power:alpha=1.5,scale=1`, `sum:(c=1,a=0.5)+(c=1,a=1.5)` or `table:path.csv`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (kind, body) = spec
            .split_once(':')
            .ok_or_else(|| domain(format!("scaling spec `{spec}` lacks a `family:` prefix")))?;
        match kind.trim() {
            "power" => {
                let mut alpha = None;
                let mut scale = 1.0;
                for (key, value) in parse_pairs(body)? {
                    match key.as_str() {
                        "alpha" | "a" => alpha = Some(value),
                        "scale" => scale = value,
                        other => return Err(domain(format!("unknown power-law key `{other}`"))),
                    }
                }
                let alpha = alpha.ok_or_else(|| domain("power-law spec needs alpha"))?;
                Self::power_law(alpha, scale)
            }
            "sum" => {
                let mut terms = Vec::new();
                for group in body.split('+') {
                    let inner = group
                        .trim()
                        .strip_prefix('(')
                        .and_then(|g| g.strip_suffix(')'))
                        .ok_or_else(|| domain(format!("sum term `{group}` must be parenthesised")))?;
                    let (mut c, mut a) = (None, None);
                    for (key, value) in parse_pairs(inner)? {
                        match key.as_str() {
                            "c" => c = Some(value),
                            "a" | "alpha" => a = Some(value),
                            other => return Err(domain(format!("unknown sum-term key `{other}`"))),
                        }
                    }
                    match (c, a) {
                        (Some(c), Some(alpha)) => terms.push(PowerTerm { c, alpha }),
                        _ => return Err(domain(format!("sum term `{group}` needs c and a"))),
                    }
                }
                Self::sum_of_powers(terms)
            }
            "table" => Self::from_csv(Path::new(body.trim())),
            other => Err(domain(format!("unknown scaling family `{other}`"))),
        }
    }

    /// Reads a two-column `r,φ(r)` CSV; a non-numeric first line is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| domain(format!("cannot read table {}: {e}", path.display())))?;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match cols.as_slice() {
                [r, v] => r.parse::<f64>().ok().zip(v.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some(p) => points.push(p),
                None if points.is_empty() && lineno == 0 => continue,
                None => {
                    return Err(domain(format!("{}:{}: expected `r,phi`", path.display(), lineno + 1)))
                }
            }
        }
        Self::tabulated(&points)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn alpha_lower(&self) -> f64 {
        self.certificate.alpha_lower
    }

    pub fn alpha_upper(&self) -> f64 {
        self.certificate.alpha_upper
    }

    /// φ(r); zero at the origin.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(domain(format!("φ evaluated at negative length {r}")));
        }
        Ok(self.value(r))
    }

    /// φ(r) without the domain check; `r` must be nonnegative.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::PowerLaw { alpha, scale } => scale * r.powf(*alpha),
            Family::SumOfPowers(terms) => {
                1.0 / terms.iter().map(|t| t.c * r.powf(-t.alpha)).sum::<f64>()
            }
            Family::Tabulated(table) => table.log_eval(r.ln()).exp(),
        }
    }

    /// Logarithmic derivative `d ln φ / d ln r` at `r > 0`.
    pub fn local_exponent(&self, r: f64) -> f64 {
        match &self.family {
            Family::PowerLaw { alpha, .. } => *alpha,
            Family::SumOfPowers(terms) => {
                let mut num = 0.0;
                let mut den = 0.0;
                for t in terms {
                    let w = t.c * r.powf(-t.alpha);
                    num += t.alpha * w;
                    den += w;
                }
                num / den
            }
            Family::Tabulated(table) => table.slope_at(r.ln()),
        }
    }

    /// Generalized inverse `inf { r : φ(r) >= t }`.
    pub fn inverse(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(domain(format!("φ⁻¹ needs a positive finite argument, got {t}")));
        }
        if let Family::PowerLaw { alpha, scale } = self.family {
            return Ok((t / scale).powf(1.0 / alpha));
        }
        const MAX_EXPANSIONS: usize = 200;
        let reached = |u: f64| self.value(u.exp()) >= t;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let mut step = 1.0;
        let mut expansions = 0;
        if reached(0.0) {
            while reached(lo) {
                hi = lo;
                lo -= step;
                step *= 2.0;
                expansions += 1;
                if expansions > MAX_EXPANSIONS {
                    return Err(numeric(format!("no lower bracket for φ⁻¹({t})")));
                }
            }
        } else {
            while !reached(hi) {
                lo = hi;
                hi += step;
                step *= 2.0;
                expansions += 1;
                if expansions > MAX_EXPANSIONS {
                    return Err(numeric(format!("no upper bracket for φ⁻¹({t})")));
                }
            }
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if reached(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi.exp())
    }

    /// One-dimensional jump intensity `1 / (r φ(r))`.
    pub fn nu1(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(domain(format!("ν¹ needs a positive length, got {r}")));
        }
        Ok(1.0 / (r * self.value(r)))
    }

    /// One-sided tail mass `N(eps) = ∫_eps^∞ ν¹(s) ds`.
    pub fn tail_mass(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(domain(format!("tail mass needs a positive cutoff, got {eps}")));
        }
        let lo = eps.ln();
        let hi = lo + TAIL_SPAN.ln();
        let body = quad::adaptive(&|u: f64| 1.0 / self.value(u.exp()), lo, hi, 14, 1e-12, 0.0)?;
        Ok(body + self.far_tail(hi.exp()))
    }

    /// Power-law closure `∫_L^∞ ν¹` using the local exponent at `L`.
    fn far_tail(&self, l: f64) -> f64 {
        1.0 / (self.local_exponent(l) * self.value(l))
    }

    /// Small-jump variance `σ²(eps) = 2 ∫_0^eps s / φ(s) ds`.
    pub fn small_jump_variance(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(domain(format!("small-jump variance needs a positive cutoff, got {eps}")));
        }
        let hi = eps.ln();
        let lo = hi - TAIL_SPAN.ln();
        let body =
            quad::adaptive(&|u: f64| (2.0 * u).exp() / self.value(u.exp()), lo, hi, 14, 1e-12, 0.0)?;
        let delta = lo.exp();
        let head = delta * delta / ((2.0 - self.local_exponent(delta)) * self.value(delta));
        Ok(2.0 * (body + head))
    }

    /// Quantile of the normalized magnitude law above `eps`: `N(s) / N(eps) = 1 - u`.
    pub fn tail_quantile(&self, eps: f64, u: f64) -> Result<f64> {
        TailSampler::new(self, eps)?.quantile(u)
    }

    /// `φ^(κ)(r) = φ(κ r) / φ(κ)` with the same certificate.
    pub fn rescale(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(domain(format!("rescale needs a positive κ, got {kappa}")));
        }
        let family = match &self.family {
            Family::PowerLaw { alpha, .. } => Family::PowerLaw { alpha: *alpha, scale: 1.0 },
            Family::SumOfPowers(terms) => {
                let total: f64 = terms.iter().map(|t| t.c * kappa.powf(-t.alpha)).sum();
                Family::SumOfPowers(
                    terms
                        .iter()
                        .map(|t| PowerTerm { c: t.c * kappa.powf(-t.alpha) / total, alpha: t.alpha })
                        .collect(),
                )
            }
            Family::Tabulated(table) => {
                let shift_r = kappa.ln();
                let shift_phi = table.log_eval(shift_r);
                Family::Tabulated(Table {
                    log_r: table.log_r.iter().map(|x| x - shift_r).collect(),
                    log_phi: table.log_phi.iter().map(|x| x - shift_phi).collect(),
                    slopes: table.slopes.clone(),
                })
            }
        };
        Ok(Self { family, certificate: self.certificate })
    }

    /// Scans log-spaced pairs `r <= R` in `[1e-6, 1e6]` for weak-scaling violations.
    pub fn check_ws(&self, n_samples: usize) -> Result<WsReport> {
        if n_samples < 2 {
            return Err(domain("check_ws needs at least two samples"));
        }
        let grid = log_grid(WS_LOW, WS_HIGH, n_samples);
        let values: Vec<f64> = grid.iter().map(|&r| self.value(r)).collect();
        let cert = self.certificate;
        let mut violations = Vec::new();
        let mut worst_ratio = 0.0f64;
        let mut pairs_checked = 0usize;
        for i in 0..n_samples {
            for j in i..n_samples {
                let ratio = values[j] / values[i];
                let stretch = grid[j] / grid[i];
                let lower = cert.c_lower * stretch.powf(cert.alpha_lower);
                let upper = cert.c_upper * stretch.powf(cert.alpha_upper);
                let excess = (lower / ratio).max(ratio / upper);
                worst_ratio = worst_ratio.max(excess);
                pairs_checked += 1;
                if excess > 1.0 + WS_SLACK {
                    violations.push(WsViolation { r: grid[i], big_r: grid[j], ratio, lower, upper });
                }
            }
        }
        Ok(WsReport { violations, worst_ratio, pairs_checked })
    }
}

impl fmt::Display for ScalingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::PowerLaw { alpha, scale } => write!(f, "power:alpha={alpha},scale={scale}"),
            Family::SumOfPowers(terms) => {
                write!(f, "sum:")?;
                for (k, t) in terms.iter().enumerate() {
                    if k > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "(c={},a={})", t.c, t.alpha)?;
                }
                Ok(())
            }
            Family::Tabulated(table) => write!(f, "table[{} points]", table.log_r.len()),
        }
    }
}

fn parse_pairs(body: &str) -> Result<Vec<(String, f64)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| domain(format!("expected key=value, got `{kv}`")))?;
            let value = v
                .trim()
                .parse::<f64>()
                .map_err(|_| domain(format!("`{}` is not a number", v.trim())))?;
            Ok((k.trim().to_string(), value))
        })
        .collect()
}

/// Ratio between the outer end of the quadrature range and the cutoff.
const TAIL_SPAN: f64 = 1e6;
const WS_LOW: f64 = 1e-6;
const WS_HIGH: f64 = 1e6;
const WS_SLACK: f64 = 1e-10;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// A sampled pair breaking the weak-scaling inequalities.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WsViolation {
    pub r: f64,
    pub big_r: f64,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Result of [`ScalingFunction::check_ws`]; `worst_ratio <= 1` means every pair is inside.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WsReport {
    pub violations: Vec<WsViolation>,
    pub worst_ratio: f64,
    pub pairs_checked: usize,
}

/// Tightest `(c_lower, c_upper)` for given exponents over the sampled pairs.
pub fn fit_ws_constants(phi: &ScalingFunction, alpha_lower: f64, alpha_upper: f64, n: usize) -> (f64, f64) {
    let grid = log_grid(WS_LOW, WS_HIGH, n.max(2));
    let values: Vec<f64> = grid.iter().map(|&r| phi.value(r)).collect();
    let mut c_lower = 1.0f64;
    let mut c_upper = 1.0f64;
    for i in 0..grid.len() {
        for j in i..grid.len() {
            let ratio = values[j] / values[i];
            let stretch = grid[j] / grid[i];
            c_lower = c_lower.min(ratio / stretch.powf(alpha_lower));
            c_upper = c_upper.max(ratio / stretch.powf(alpha_upper));
        }
    }
    (c_lower, c_upper)
}

/// Inverse-CDF sampler for jump magnitudes above a cutoff.
#[derive(Debug, Clone)]
pub struct TailSampler {
    eps: f64,
    mass: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Power { inv_alpha: f64 },
    Table { phi: ScalingFunction, log_nodes: Vec<f64>, cumulative: Vec<f64>, far_exponent: f64, far_mass: f64 },
}

const SAMPLER_STEP: f64 = 0.1;

impl TailSampler {
    pub fn new(phi: &ScalingFunction, eps: f64) -> Result<Self> {
        let mass = phi.tail_mass(eps)?;
        if let Family::PowerLaw { alpha, .. } = phi.family {
            return Ok(Self { eps, mass, kind: SamplerKind::Power { inv_alpha: 1.0 / alpha } });
        }
        let lo = eps.ln();
        let n = (TAIL_SPAN.ln() / SAMPLER_STEP).ceil() as usize;
        let integrand = |u: f64| 1.0 / phi.value(u.exp());
        let mut log_nodes = Vec::with_capacity(n + 1);
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        log_nodes.push(lo);
        cumulative.push(0.0);
        for k in 0..n {
            let a = lo + SAMPLER_STEP * k as f64;
            let b = a + SAMPLER_STEP;
            acc += quad::gk15(&integrand, a, b).0;
            log_nodes.push(b);
            cumulative.push(acc);
        }
        let far = log_nodes[n].exp();
        let far_exponent = phi.local_exponent(far);
        let far_mass = phi.tail_mass(far)?;
        let mass = acc + far_mass;
        Ok(Self {
            eps,
            mass,
            kind: SamplerKind::Table { phi: phi.clone(), log_nodes, cumulative, far_exponent, far_mass },
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Total one-sided tail mass `N(eps)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Magnitude `s >= eps` with `N(s) = (1 - u) N(eps)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0 && u < 1.0) {
            return Err(domain(format!("quantile level {u} outside [0, 1)")));
        }
        Ok(self.sample(u))
    }

    /// Unchecked quantile for `u` in `[0, 1)`.
    #[inline]
    pub fn sample(&self, u: f64) -> f64 {
        match &self.kind {
            SamplerKind::Power { inv_alpha } => {
                if *inv_alpha == 1.0 {
                    self.eps / (1.0 - u)
                } else {
                    self.eps * (1.0 - u).powf(-inv_alpha)
                }
            }
            SamplerKind::Table { phi, log_nodes, cumulative, far_exponent, far_mass } => {
                let target = u * self.mass;
                let last = cumulative.len() - 1;
                if target >= cumulative[last] {
                    let remaining = (self.mass - target).max(f64::MIN_POSITIVE);
                    return log_nodes[last].exp() * (remaining / far_mass).powf(-1.0 / far_exponent);
                }
                let k = cumulative.partition_point(|&c| c <= target).saturating_sub(1).min(last - 1);
                let integrand = |w: f64| 1.0 / phi.value(w.exp());
                let (a, b) = (log_nodes[k], log_nodes[k + 1]);
                let need = target - cumulative[k];
                let (mut lo, mut hi) = (a, b);
                let mut v = a + (b - a) * need / (cumulative[k + 1] - cumulative[k]);
                for _ in 0..60 {
                    let g = quad::gk15(&integrand, a, v).0 - need;
                    if g > 0.0 {
                        hi = v;
                    } else {
                        lo = v;
                    }
                    let step = g * phi.value(v.exp());
                    let next = v - step;
                    let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
                    if (next - v).abs() < 1e-14 * (1.0 + v.abs()) {
                        v = next;
                        break;
                    }
                    v = next;
                }
                v.exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn sum_case() -> ScalingFunction {
        ScalingFunction::parse("sum:(c=1,a=0.5)+(c=1,a=1.5)").unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn eval_examples() {
        let p = ScalingFunction::power_law(1.5, 1.0).unwrap();
        assert!(close(p.eval(4.0).unwrap(), 8.0, 1e-15));
        assert_eq!(p.eval(0.0).unwrap(), 0.0);
        assert_eq!(sum_case().eval(1.0).unwrap(), 0.5);
        assert_eq!(sum_case().eval(0.0).unwrap(), 0.0);
        assert!(matches!(p.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn constructor_rejects_bad_exponents() {
        assert!(ScalingFunction::power_law(2.0, 1.0).is_err());
        assert!(ScalingFunction::power_law(-0.5, 1.0).is_err());
        assert!(ScalingFunction::power_law(1.0, 0.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        let id = ScalingFunction::power_law(1.0, 1.0).unwrap();
        assert!(close(id.inverse(9.0).unwrap(), 9.0, 1e-15));
        let p = ScalingFunction::power_law(1.5, 1.0).unwrap();
        assert!(close(p.inverse(8.0).unwrap(), 4.0, 1e-14));
        assert!(close(sum_case().inverse(0.5).unwrap(), 1.0, 1e-11));
        assert!(matches!(p.inverse(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn nu1_examples() {
        let p1 = ScalingFunction::power_law(1.0, 1.0).unwrap();
        assert_eq!(p1.nu1(2.0).unwrap(), 0.25);
        assert_eq!(ScalingFunction::power_law(1.5, 1.0).unwrap().nu1(1.0).unwrap(), 1.0);
        assert_eq!(sum_case().nu1(1.0).unwrap(), 2.0);
        assert!(p1.nu1(0.0).is_err());
    }

    #[test]
    fn tail_mass_examples() {
        let p1 = ScalingFunction::power_law(1.0, 1.0).unwrap();
        assert!(close(p1.tail_mass(1.0).unwrap(), 1.0, 1e-10));
        let half = ScalingFunction::power_law(0.5, 1.0).unwrap();
        assert!(close(half.tail_mass(4.0).unwrap(), 1.0, 1e-10));
        // term-wise: Σ c_k eps^{-a_k} / a_k
        assert!(close(sum_case().tail_mass(1.0).unwrap(), 8.0 / 3.0, 1e-8));
        assert!(p1.tail_mass(0.0).is_err());
    }

    #[test]
    fn small_jump_variance_examples() {
        let p1 = ScalingFunction::power_law(1.0, 1.0).unwrap();
        assert!(close(p1.small_jump_variance(1.0).unwrap(), 2.0, 1e-10));
        let p15 = ScalingFunction::power_law(1.5, 1.0).unwrap();
        assert!(close(p15.small_jump_variance(1.0).unwrap(), 4.0, 1e-9));
        // term-wise: 2 Σ c_k eps^{2-a_k} / (2-a_k)
        assert!(close(sum_case().small_jump_variance(1.0).unwrap(), 16.0 / 3.0, 1e-8));
    }

    #[test]
    fn tail_quantile_examples() {
        let p1 = ScalingFunction::power_law(1.0, 1.0).unwrap();
        assert!(close(p1.tail_quantile(1.0, 0.5).unwrap(), 2.0, 1e-14));
        assert!(close(p1.tail_quantile(1.0, 1e-12).unwrap(), 1.0, 1e-10));
        // Bisection on the analytic tail 2 s^{-1/2} + (2/3) s^{-3/2} = 4/3.
        let analytic = |s: f64| 2.0 / s.sqrt() + (2.0 / 3.0) * s.powf(-1.5);
        let (mut lo, mut hi) = (1.0f64, 100.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if analytic(mid) > 4.0 / 3.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = sum_case().tail_quantile(1.0, 0.5).unwrap();
        assert!(close(s, lo, 1e-9), "{s} vs {lo}");
    }

    #[test]
    fn rescale_examples() {
        let p = ScalingFunction::power_law(1.3, 7.0).unwrap().rescale(5.0).unwrap();
        assert_eq!(p.family(), &Family::PowerLaw { alpha: 1.3, scale: 1.0 });
        let s = sum_case().rescale(2.0).unwrap();
        assert!(close(s.eval(1.0).unwrap(), 1.0, 1e-14));
        for r in [0.1, 1.0, 3.0, 40.0] {
            let direct = sum_case().value(2.0 * r) / sum_case().value(2.0);
            assert!(close(s.value(r), direct, 1e-13));
        }
        assert_eq!(s.certificate(), sum_case().certificate());
        assert!(sum_case().rescale(0.0).is_err());
    }

    #[test]
    fn check_ws_examples() {
        let p1 = ScalingFunction::power_law(1.0, 1.0).unwrap();
        assert!(p1.check_ws(60).unwrap().violations.is_empty());
        let wrong = p1
            .clone()
            .with_certificate(Certificate { alpha_lower: 0.5, alpha_upper: 0.5, c_lower: 1.0, c_upper: 1.0 })
            .unwrap();
        assert!(!wrong.check_ws(60).unwrap().violations.is_empty());
        let (cl, cu) = fit_ws_constants(&sum_case(), 0.5, 1.5, 80);
        let fitted = sum_case()
            .with_certificate(Certificate { alpha_lower: 0.5, alpha_upper: 1.5, c_lower: cl, c_upper: cu })
            .unwrap();
        assert!(fitted.check_ws(80).unwrap().violations.is_empty());
        assert!(sum_case().check_ws(80).unwrap().violations.is_empty());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(ScalingFunction::parse("power:beta=1").is_err());
        assert!(ScalingFunction::parse("sum:c=1,a=0.5").is_err());
        assert!(ScalingFunction::parse("cubic:a=1").is_err());
        assert!(ScalingFunction::parse("power").is_err());
    }

    #[test]
    fn tabulated_interpolates_and_extrapolates() {
        let t = ScalingFunction::tabulated(&[(1.0, 1.0), (2.0, 2.5), (4.0, 4.0)])
            .unwrap();
        assert!(close(t.value(1.0), 1.0, 1e-14));
        assert!(close(t.value(4.0), 4.0, 1e-14));
        let slope = t.local_exponent(100.0);
        assert!(close(t.value(8.0), 4.0 * 2f64.powf(slope), 1e-12));
        assert!(close(t.value(t.inverse(3.0).unwrap()), 3.0, 1e-10));
    }
}
