//! Axis-aligned jump kernels, their multipliers, and the product-form heat-kernel envelope.
//!
//! Axis indices are zero-based throughout.

mod energy;

pub use energy::{dirichlet_energy, nash_check, GridFunction, NashReport, NashRow};

use serde::Serialize;

use crate::error::{config, domain, Error, Result};
use crate::scaling::ScalingFunction;

/// Value of a jump kernel at a pair of points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    /// The points differ only along `axis`; `value` is the intensity.
    Axis { axis: usize, value: f64 },
    /// The points differ along two or more axes, or the pair is truncated away.
    Zero,
    /// The points coincide; the kernel is singular here and has no value.
    Diagonal,
}

impl KernelValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            KernelValue::Axis { value, .. } => Some(*value),
            KernelValue::Zero => Some(0.0),
            KernelValue::Diagonal => None,
        }
    }
}

/// Index of the single differing coordinate, `Err(true)` for several, `Err(false)` for none.
fn differing_axis(x: &[f64], y: &[f64]) -> std::result::Result<usize, bool> {
    let mut found = None;
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if a != b {
            if found.is_some() {
                return Err(true);
            }
            found = Some(i);
        }
    }
    found.ok_or(false)
}

/// The reference kernel `J^φ(x, y) = ν¹(|x^i - y^i|)` when only axis `i` differs.
pub fn jump_kernel_phi(x: &[f64], y: &[f64], phi: &ScalingFunction) -> KernelValue {
    match differing_axis(x, y) {
        Ok(axis) => {
            let r = (x[axis] - y[axis]).abs();
            KernelValue::Axis { axis, value: 1.0 / (r * phi.value(r)) }
        }
        Err(true) => KernelValue::Zero,
        Err(false) => KernelValue::Diagonal,
    }
}

/// Symmetric bounded multiplier `λ(x, y)` applied to `J^φ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplier {
    Constant { c: f64 },
    /// `½(c(x) + c(y))` where `c(z)` is `high` on cells with even `Σ floor(z^i / period)`.
    Checkerboard { period: f64, low: f64, high: f64 },
    /// `1 + amplitude · cos(frequency · (x¹ - y¹))`.
    SmoothWave { frequency: f64, amplitude: f64 },
}

impl Multiplier {
    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Multiplier::Constant { c } => c,
            Multiplier::Checkerboard { period, low, high } => {
                let cell = |z: &[f64]| {
                    let parity = z.iter().map(|v| (v / period).floor() as i64).sum::<i64>();
                    if parity.rem_euclid(2) == 0 {
                        high
                    } else {
                        low
                    }
                };
                0.5 * (cell(x) + cell(y))
            }
            Multiplier::SmoothWave { frequency, amplitude } => {
                1.0 + amplitude * (frequency * (x[0] - y[0])).cos()
            }
        }
    }

    /// Closed range of values the multiplier can take.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Multiplier::Constant { c } => (c, c),
            Multiplier::Checkerboard { low, high, .. } => (low.min(high), low.max(high)),
            Multiplier::SmoothWave { amplitude, .. } => (1.0 - amplitude.abs(), 1.0 + amplitude.abs()),
        }
    }

    pub fn is_constant(&self) -> Option<f64> {
        match *self {
            Multiplier::Constant { c } => Some(c),
            _ => None,
        }
    }

    /// Parses `constant:c=1`, `checkerboard:period=1,low=0.5,high=2` or
    /// `wave:frequency=1,amplitude=0.5`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, body) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
        let mut fields = std::collections::BTreeMap::new();
        for kv in body.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| config(format!("expected key=value in multiplier, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| config(format!("multiplier value `{}` is not a number", v.trim())))?;
            fields.insert(k.trim().to_string(), v);
        }
        let mut take = |name: &str, default: Option<f64>| {
            fields
                .remove(name)
                .or(default)
                .ok_or_else(|| config(format!("multiplier `{kind}` needs `{name}`")))
        };
        let m = match kind {
            "constant" => Multiplier::Constant { c: take("c", Some(1.0))? },
            "checkerboard" => Multiplier::Checkerboard {
                period: take("period", Some(1.0))?,
                low: take("low", None)?,
                high: take("high", None)?,
            },
            "wave" | "smooth_wave" => Multiplier::SmoothWave {
                frequency: take("frequency", Some(1.0))?,
                amplitude: take("amplitude", None)?,
            },
            other => return Err(config(format!("unknown multiplier `{other}`"))),
        };
        if let Some(k) = fields.keys().next() {
            return Err(config(format!("unknown multiplier key `{k}`")));
        }
        Ok(m)
    }
}

/// Jump kernel `J(x, y) = λ(x, y) J^φ(x, y)` with `Λ⁻¹ <= λ <= Λ`, optionally truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    phi: ScalingFunction,
    lambda_bound: f64,
    multiplier: Multiplier,
    dim: usize,
    truncation: Option<f64>,
}

impl KernelSpec {
    pub fn new(phi: ScalingFunction, lambda_bound: f64, multiplier: Multiplier, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(config("dimension must be at least 1"));
        }
        if !(lambda_bound >= 1.0 && lambda_bound.is_finite()) {
            return Err(config(format!("comparability bound {lambda_bound} must be >= 1")));
        }
        match multiplier {
            Multiplier::Checkerboard { period, .. } if !(period > 0.0) => {
                return Err(config(format!("checkerboard period {period} must be positive")))
            }
            Multiplier::SmoothWave { amplitude, .. } if amplitude.abs() >= 1.0 => {
                return Err(config(format!("wave amplitude {amplitude} must be below 1")))
            }
            _ => {}
        }
        Ok(Self { phi, lambda_bound, multiplier, dim, truncation: None })
    }

    /// Untruncated `J^φ` itself.
    pub fn reference(phi: ScalingFunction, dim: usize) -> Result<Self> {
        Self::new(phi, 1.0, Multiplier::Constant { c: 1.0 }, dim)
    }

    /// Checks that the multiplier's range sits inside `[Λ⁻¹, Λ]`.
    pub fn validate_bounds(&self) -> Result<()> {
        let (lo, hi) = self.multiplier.range();
        let bound = self.lambda_bound;
        if lo < bound.recip() * (1.0 - 1e-12) || hi > bound * (1.0 + 1e-12) {
            return Err(config(format!(
                "multiplier range [{lo}, {hi}] escapes [{}, {bound}]",
                bound.recip()
            )));
        }
        Ok(())
    }

    pub fn phi(&self) -> &ScalingFunction {
        &self.phi
    }

    pub fn lambda_bound(&self) -> f64 {
        self.lambda_bound
    }

    pub fn multiplier(&self) -> &Multiplier {
        &self.multiplier
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    /// `λ(x, y)`, rejecting values outside `[Λ⁻¹, Λ]`.
    #[inline]
    pub fn multiplier_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let m = self.multiplier.value(x, y);
        let bound = self.lambda_bound;
        if !(m >= bound.recip() * (1.0 - 1e-12) && m <= bound * (1.0 + 1e-12)) {
            return Err(Error::Invariant(format!(
                "multiplier {m} at ({x:?}, {y:?}) escapes [{}, {bound}]",
                bound.recip()
            )));
        }
        Ok(m)
    }

    /// `J(x, y)`; pairs farther apart than the truncation level give `Zero`.
    pub fn jump_kernel(&self, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        match jump_kernel_phi(x, y, &self.phi) {
            KernelValue::Axis { axis, value } => {
                if let Some(lam) = self.truncation {
                    if (x[axis] - y[axis]).abs() > lam {
                        return Ok(KernelValue::Zero);
                    }
                }
                Ok(KernelValue::Axis { axis, value: value * self.multiplier_at(x, y)? })
            }
            other => Ok(other),
        }
    }

    /// `J_λ(x, y) = J(x, y) 1{|x - y| <= lam}`; `lam = ∞` leaves the kernel unchanged.
    pub fn truncate(&self, lam: f64) -> Result<Self> {
        if !(lam > 0.0) {
            return Err(domain(format!("truncation level {lam} must be positive")));
        }
        let mut out = self.clone();
        if lam.is_finite() {
            out.truncation = Some(self.truncation.map_or(lam, |old| old.min(lam)));
        }
        Ok(out)
    }
}

/// Product-form envelope `prefactor · Π factors`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeValue {
    pub value: f64,
    pub prefactor: f64,
    pub factors: Vec<f64>,
}

fn check_envelope_args(t: f64, x: &[f64], y: &[f64]) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("envelope time {t} must be positive")));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(domain("envelope points must share a positive dimension"));
    }
    Ok(())
}

/// `Π_i ([φ⁻¹(t)]⁻¹ ∧ t ν¹(|x^i - y^i|))`, reported against the prefactor `[φ⁻¹(t)]^{-d}`.
pub fn envelope_z(t: f64, x: &[f64], y: &[f64], phi: &ScalingFunction) -> Result<EnvelopeValue> {
    check_envelope_args(t, x, y)?;
    let scale = phi.inverse(t)?;
    let cap = scale.recip();
    let mut value = 1.0;
    let mut factors = Vec::with_capacity(x.len());
    for (a, b) in x.iter().zip(y) {
        let r = (a - b).abs();
        let axis = if r == 0.0 { cap } else { cap.min(t / (r * phi.value(r))) };
        value *= axis;
        factors.push(axis * scale);
    }
    Ok(EnvelopeValue { value, prefactor: cap.powi(x.len() as i32), factors })
}

/// `[φ⁻¹(t)]^{-d} Π_i (1 ∧ t φ⁻¹(t) / (|x^i - y^i| φ(|x^i - y^i|)))`.
pub fn envelope_x(t: f64, x: &[f64], y: &[f64], phi: &ScalingFunction) -> Result<EnvelopeValue> {
    check_envelope_args(t, x, y)?;
    let scale = phi.inverse(t)?;
    let factors: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = (a - b).abs();
            if r == 0.0 {
                1.0
            } else {
                (t * scale / (r * phi.value(r))).min(1.0)
            }
        })
        .collect();
    let prefactor = scale.powi(-(x.len() as i32));
    let value = prefactor * factors.iter().product::<f64>();
    Ok(EnvelopeValue { value, prefactor, factors })
}
