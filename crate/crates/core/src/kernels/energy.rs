//! Dirichlet energy of grid functions under an axis-aligned jump kernel.
//!
//! The function is the multilinear interpolant of its node values and vanishes outside
//! the grid box. Each axis contributes an integral over lines parallel to it; the lines
//! are placed at two-point Gauss positions inside every transverse cell, which integrates
//! the transverse direction exactly for a constant multiplier.

use serde::Serialize;

use crate::error::{domain, numeric, Result};
use crate::kernels::KernelSpec;
use crate::quad;
use crate::scaling::ScalingFunction;

/// Node values of a multilinear function on a uniform grid (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    lower: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl GridFunction {
    /// `shape[i]` nodes along axis `i`, the first at `lower[i]`.
    pub fn new(lower: Vec<f64>, spacing: f64, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if lower.len() != shape.len() || shape.is_empty() {
            return Err(domain("grid lower corner and shape must share a positive dimension"));
        }
        if !(spacing > 0.0) {
            return Err(domain(format!("grid spacing {spacing} must be positive")));
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(domain("every axis needs at least two nodes"));
        }
        if values.len() != shape.iter().product::<usize>() {
            return Err(domain("value count does not match the grid shape"));
        }
        Ok(Self { lower, spacing, shape, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(lower: Vec<f64>, spacing: f64, shape: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let total: usize = shape.iter().product();
        let d = shape.len();
        let mut point = vec![0.0; d];
        let mut values = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            for axis in (0..d).rev() {
                point[axis] = lower[axis] + spacing * (rem % shape[axis]) as f64;
                rem /= shape[axis];
            }
            values.push(f(&point));
        }
        Self::new(lower, spacing, shape, values)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for axis in (0..self.dim().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.shape[axis + 1];
        }
        strides
    }

    /// True when every boundary node is zero, so the interpolant is supported in the box.
    pub fn is_compactly_supported(&self) -> bool {
        let strides = self.strides();
        self.values.iter().enumerate().all(|(flat, &v)| {
            v == 0.0
                || (0..self.dim()).all(|axis| {
                    let k = (flat / strides[axis]) % self.shape[axis];
                    k != 0 && k + 1 != self.shape[axis]
                })
        })
    }

    /// Integral of the interpolant.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing.powi(self.dim() as i32)
    }

    /// Exact squared L² norm of the interpolant (tensor-product mass matrix).
    pub fn norm_sq(&self) -> f64 {
        let strides = self.strides();
        let mut mass = self.values.clone();
        let h = self.spacing;
        for axis in 0..self.dim() {
            let n = self.shape[axis];
            let stride = strides[axis];
            let mut next = vec![0.0; mass.len()];
            for (flat, out) in next.iter_mut().enumerate() {
                let k = (flat / stride) % n;
                let mut acc = 4.0 * mass[flat];
                if k > 0 {
                    acc += mass[flat - stride];
                }
                if k + 1 < n {
                    acc += mass[flat + stride];
                }
                if k == 0 || k + 1 == n {
                    acc -= 2.0 * mass[flat];
                }
                *out = acc * h / 6.0;
            }
            mass = next;
        }
        mass.iter().zip(&self.values).map(|(m, v)| m * v).sum()
    }

    /// Multilinear interpolation at `point`; zero outside the box.
    pub fn interpolate(&self, point: &[f64]) -> f64 {
        let d = self.dim();
        let strides = self.strides();
        let mut base = 0usize;
        let mut frac = vec![0.0; d];
        for axis in 0..d {
            let s = (point[axis] - self.lower[axis]) / self.spacing;
            let last = (self.shape[axis] - 1) as f64;
            if !(0.0..=last).contains(&s) {
                return 0.0;
            }
            let cell = (s.floor() as usize).min(self.shape[axis] - 2);
            frac[axis] = s - cell as f64;
            base += cell * strides[axis];
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = base;
            for axis in 0..d {
                if corner >> axis & 1 == 1 {
                    weight *= frac[axis];
                    flat += strides[axis];
                } else {
                    weight *= 1.0 - frac[axis];
                }
            }
            if weight != 0.0 {
                total += weight * self.values[flat];
            }
        }
        total
    }
}

// Seven-point Gauss–Legendre rule on [-1, 1].
const GAUSS7_X: [f64; 7] = [
    -0.949_107_912_342_758_5,
    -0.741_531_185_599_394_4,
    -0.405_845_151_377_397_2,
    0.0,
    0.405_845_151_377_397_2,
    0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
];
const GAUSS7_W: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];
const GAUSS2_X: f64 = 0.577_350_269_189_625_8;

/// Lower cutoff of the τ panels relative to the grid spacing.
const TAU_MIN_RATIO: f64 = 1e-2;
/// Width of a τ panel in log scale.
const PANEL_LOG_WIDTH: f64 = std::f64::consts::LN_2;

struct LineContext<'a> {
    spec: &'a KernelSpec,
    phi: &'a ScalingFunction,
    axis: usize,
    lower: f64,
    upper: f64,
    spacing: f64,
    tau_min: f64,
    taylor: f64,
    cap: f64,
}

impl LineContext<'_> {
    fn tail(&self, from: f64) -> Result<f64> {
        if from >= self.cap {
            return Ok(0.0);
        }
        let beyond = if self.cap.is_finite() { self.phi.tail_mass(self.cap)? } else { 0.0 };
        Ok(self.phi.tail_mass(from)? - beyond)
    }

    /// Kernel mass from `point` along `sign` for distances in `[from, cap]`.
    fn outside_mass(&self, point: &[f64], sign: f64, from: f64, scratch: &mut [f64]) -> Result<f64> {
        if from >= self.cap {
            return Ok(0.0);
        }
        if let Some(c) = self.spec.multiplier().is_constant() {
            return Ok(c * self.tail(from)?);
        }
        let far = (from * 1e6).min(self.cap);
        let lo = from.ln();
        let hi = far.ln();
        let panels = ((hi - lo) / PANEL_LOG_WIDTH).ceil().max(1.0) as usize;
        let integrand = |u: f64| {
            let tau = u.exp();
            let mut y = point.to_vec();
            y[self.axis] += sign * tau;
            self.spec.multiplier().value(point, &y) / self.phi.value(tau)
        };
        let body = quad::adaptive(&integrand, lo, hi, panels, 1e-9, 0.0)?;
        let rest = if far < self.cap {
            scratch.copy_from_slice(point);
            scratch[self.axis] += sign * far;
            self.spec.multiplier().value(point, scratch) * self.tail(far)?
        } else {
            0.0
        };
        Ok(body + rest)
    }

    /// Energy contribution of one line given node values `g` and a template point.
    fn line_energy(&self, g: &[f64], template: &[f64]) -> Result<f64> {
        let n_cells = g.len() - 1;
        let h = self.spacing;
        let mut point = template.to_vec();
        let shifted = std::cell::RefCell::new(template.to_vec());
        let mut scratch = template.to_vec();
        let value_at = |x: f64| -> f64 {
            let s = (x - self.lower) / h;
            if s <= 0.0 || s >= n_cells as f64 {
                return 0.0;
            }
            let k = (s.floor() as usize).min(n_cells - 1);
            let f = s - k as f64;
            g[k] * (1.0 - f) + g[k + 1] * f
        };
        let mut total = 0.0;
        for cell in 0..n_cells {
            let (g0, g1) = (g[cell], g[cell + 1]);
            let near_support = g0 != 0.0 || g1 != 0.0;
            let slope = (g1 - g0) / h;
            let mid = self.lower + (cell as f64 + 0.5) * h;
            for (xg, wg) in GAUSS7_X.iter().zip(GAUSS7_W.iter()) {
                let x = mid + 0.5 * h * xg;
                let w = 0.5 * h * wg;
                let gx = g0 + (g1 - g0) * (0.5 + 0.5 * xg);
                point[self.axis] = x;
                let mut local = 0.0;
                if near_support {
                    local += slope * slope * self.spec.multiplier().value(&point, &point) * self.taylor;
                }
                for sign in [1.0f64, -1.0] {
                    let room = if sign > 0.0 { self.upper - x } else { x - self.lower };
                    let reach = room.min(self.cap);
                    if reach > self.tau_min {
                        let lo = self.tau_min.ln();
                        let hi = reach.ln();
                        let panels = ((hi - lo) / PANEL_LOG_WIDTH).ceil().max(1.0) as usize;
                        let integrand = |u: f64| {
                            let tau = u.exp();
                            let diff = value_at(x + sign * tau) - gx;
                            if diff == 0.0 {
                                return 0.0;
                            }
                            let mut shifted = shifted.borrow_mut();
                            shifted.copy_from_slice(&point);
                            shifted[self.axis] = x + sign * tau;
                            diff * diff * self.spec.multiplier().value(&point, &shifted) / self.phi.value(tau)
                        };
                        local += quad::composite(&integrand, lo, hi, panels);
                    }
                    if gx != 0.0 {
                        local += 2.0 * gx * gx * self.outside_mass(&point, sign, room, &mut scratch)?;
                    }
                }
                total += w * local;
            }
        }
        Ok(total)
    }
}

/// `Σ_i ∫∫ (f(x + τ e_i) - f(x))² J(x, x + τ e_i) dτ dx` for a grid function supported in its box.
pub fn dirichlet_energy(f: &GridFunction, spec: &KernelSpec) -> Result<f64> {
    if f.dim() != spec.dim() {
        return Err(domain(format!("grid dimension {} differs from kernel dimension {}", f.dim(), spec.dim())));
    }
    if !f.is_compactly_supported() {
        return Err(domain("grid function is not compactly supported inside its box"));
    }
    if f.values.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let d = f.dim();
    let h = f.spacing;
    let phi = spec.phi();
    let tau_min = TAU_MIN_RATIO * h;
    let cap = spec.truncation().unwrap_or(f64::INFINITY);
    let taylor = phi.small_jump_variance(tau_min.min(cap))?;
    let mut total = 0.0;
    for axis in 0..d {
        let n = f.shape[axis];
        let ctx = LineContext {
            spec,
            phi,
            axis,
            lower: f.lower[axis],
            upper: f.lower[axis] + h * (n - 1) as f64,
            spacing: h,
            tau_min,
            taylor,
            cap,
        };
        let transverse: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
        let cells: Vec<usize> = transverse.iter().map(|&a| f.shape[a] - 1).collect();
        let combos: usize = cells.iter().map(|c| 2 * c).product();
        let weight = (0.5 * h).powi(transverse.len() as i32);
        let mut template = f.lower.clone();
        let mut g = vec![0.0; n];
        for combo in 0..combos {
            let mut rem = combo;
            for (slot, &a) in transverse.iter().enumerate() {
                let m = 2 * cells[slot];
                let pick = rem % m;
                rem /= m;
                let offset = if pick % 2 == 0 { -GAUSS2_X } else { GAUSS2_X };
                template[a] = f.lower[a] + h * ((pick / 2) as f64 + 0.5 + 0.5 * offset);
            }
            for (k, gk) in g.iter_mut().enumerate() {
                template[axis] = f.lower[axis] + h * k as f64;
                *gk = f.interpolate(&template);
            }
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            total += weight * ctx.line_energy(&g, &template)?;
        }
    }
    if !total.is_finite() || total < 0.0 {
        return Err(numeric(format!("energy quadrature returned {total}")));
    }
    Ok(total)
}

/// One dilation of the Nash spot-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashRow {
    pub dilation: f64,
    pub norm_sq: f64,
    pub energy: f64,
    pub ratio: f64,
}

/// Ratios `‖f‖² / (E(f, f) φ(‖f‖₂^{-2/d}))` over dilations of a unit-mass tent bump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashReport {
    pub rows: Vec<NashRow>,
    pub max_ratio: f64,
    pub spread: f64,
    pub pass: bool,
}

/// Nodes per axis of the bump grid in each dimension.
fn nash_resolution(d: usize) -> usize {
    if d == 1 {
        129
    } else {
        33
    }
}

/// Nash-inequality spot check over dilations `{1/4, 1/2, 1, 2, 4}`; PASS iff the spread is at most 100.
pub fn nash_check(spec: &KernelSpec) -> Result<NashReport> {
    let d = spec.dim();
    if d > 2 {
        return Err(domain(format!("nash check supports d <= 2, got {d}")));
    }
    let nodes = nash_resolution(d);
    let mut rows = Vec::new();
    for dilation in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let spacing = 2.0 * dilation / (nodes - 1) as f64;
        let bump = GridFunction::from_fn(vec![-dilation; d], spacing, vec![nodes; d], |x| {
            x.iter().map(|v| (1.0 - (v / dilation).abs()).max(0.0)).product::<f64>() / dilation.powi(d as i32)
        })?;
        let norm_sq = bump.norm_sq();
        let energy = dirichlet_energy(&bump, spec)?;
        if !(energy > 0.0) {
            return Err(numeric(format!("nonpositive energy {energy} at dilation {dilation}")));
        }
        let arg = norm_sq.powf(-1.0 / d as f64);
        let ratio = norm_sq / (energy * spec.phi().value(arg));
        rows.push(NashRow { dilation, norm_sq, energy, ratio });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let spread = max_ratio / min_ratio;
    let pass = max_ratio.is_finite() && min_ratio > 0.0 && spread <= 100.0;
    Ok(NashReport { rows, max_ratio, spread, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Multiplier;

    fn tent(cells: usize) -> GridFunction {
        let h = 2.0 / cells as f64;
        GridFunction::from_fn(vec![-1.0], h, vec![cells + 1], |x| (1.0 - x[0].abs()).max(0.0)).unwrap()
    }

    fn cauchy_spec(d: usize) -> KernelSpec {
        KernelSpec::reference(ScalingFunction::power_law(1.0, 1.0).unwrap(), d).unwrap()
    }

    #[test]
    fn zero_function_has_zero_energy() {
        let f = tent(10).scaled(0.0);
        assert_eq!(dirichlet_energy(&f, &cauchy_spec(1)).unwrap(), 0.0);
    }

    #[test]
    fn energy_is_quadratic() {
        let f = tent(40);
        let e1 = dirichlet_energy(&f, &cauchy_spec(1)).unwrap();
        let e2 = dirichlet_energy(&f.scaled(2.0), &cauchy_spec(1)).unwrap();
        assert!((e2 / e1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn tent_energy_matches_fourier_value() {
        // ∫ |f̂(ξ)|² |ξ| dξ for the unit tent equals 8 ln 2.
        let e = dirichlet_energy(&tent(200), &cauchy_spec(1)).unwrap();
        let exact = 8.0 * std::f64::consts::LN_2;
        assert!((e - exact).abs() < 0.02 * exact, "{e} vs {exact}");
    }

    #[test]
    fn norms_of_tent() {
        let f = tent(64);
        assert!((f.integral() - 1.0).abs() < 1e-12);
        assert!((f.norm_sq() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_functions_touching_the_boundary() {
        let f = GridFunction::from_fn(vec![0.0], 0.1, vec![11], |_| 1.0).unwrap();
        assert!(dirichlet_energy(&f, &cauchy_spec(1)).is_err());
    }

    #[test]
    fn constant_multiplier_scales_energy() {
        let f = tent(40);
        let phi = ScalingFunction::power_law(0.7, 1.0).unwrap();
        let base = dirichlet_energy(&f, &KernelSpec::reference(phi.clone(), 1).unwrap()).unwrap();
        let spec = KernelSpec::new(phi, 2.0, Multiplier::Constant { c: 1.5 }, 1).unwrap();
        let scaled = dirichlet_energy(&f, &spec).unwrap();
        assert!((scaled / base - 1.5).abs() < 1e-12);
    }

    #[test]
    fn nash_power_law_is_scale_free() {
        let report = nash_check(&cauchy_spec(1)).unwrap();
        assert!(report.pass);
        assert!((report.spread - 1.0).abs() < 1e-6, "{}", report.spread);
    }
}
