//! Monte-Carlo experiments: exit-time tails, exit-time moments and on-diagonal scaling.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config, Result};
use crate::simulate::{derive_seed, Observer, Process, SimConfig, Simulator, SmallJumpMode, Terminal};
use crate::stats::{linear_fit, mean_interval, wilson_interval};
use crate::verify::{Verdict, TRUSTED_COUNT};

/// Largest `σ(eps) / φ⁻¹(t)` accepted when small jumps are dropped.
pub const DROP_SIGMA_RATIO: f64 = 0.01;
/// Largest `eps / φ⁻¹(t)` accepted when small jumps are replaced by a Brownian part.
pub const GAUSSIAN_EPS_RATIO: f64 = 0.05;
/// Largest missed-exit proxy `σ(eps) √(time scale) / radius`.
pub const EXIT_GATE_RATIO: f64 = 0.01;
/// Largest fraction of paths allowed to survive the horizon in a mean-exit experiment.
pub const MAX_SURVIVORS: f64 = 0.01;
/// Largest accepted spread of the normalized on-diagonal density.
pub const MAX_DIAG_SPREAD: f64 = 100.0;
/// Largest accepted deviation of the on-diagonal slope from `-d/α`.
pub const SLOPE_TOL: f64 = 0.1;
/// Largest accepted max/min ratio of normalized exit moments across radii.
pub const MAX_MOMENT_SPREAD: f64 = 10.0;

/// How the small-jump cutoff is chosen for each time in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Absolute(f64),
    /// Fraction of the spatial scale `φ⁻¹(t)`.
    Relative(f64),
}

impl Cutoff {
    fn at(self, scale: f64) -> f64 {
        match self {
            Cutoff::Absolute(eps) => eps,
            Cutoff::Relative(ratio) => ratio * scale,
        }
    }
}

/// Maps every path index through `f` in parallel and returns the results in index order.
pub fn map_paths<T, F>(n_paths: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n_paths).into_par_iter().map(f).collect()
}

/// Terminal positions of every path of `config`.
pub fn simulate_terminals(config: &SimConfig, process: Process) -> Result<Vec<Vec<f64>>> {
    let sim = Simulator::new(config)?;
    map_paths(config.n_paths, |i| sim.terminal(process, i))
}

/// Whether the small-jump treatment is fine enough to resolve the spatial scale `scale`.
///
/// Returns the verdict and the measured ratio (`σ/scale` when dropping, `eps/scale` otherwise).
pub fn density_gate(config: &SimConfig, scale: f64) -> Result<(bool, f64)> {
    Ok(match config.small_jump_mode {
        SmallJumpMode::Drop => {
            let ratio = config.phi().small_jump_variance(config.eps)?.sqrt() / scale;
            (ratio <= DROP_SIGMA_RATIO, ratio)
        }
        SmallJumpMode::Gaussian => {
            let ratio = config.eps / scale;
            (ratio <= GAUSSIAN_EPS_RATIO, ratio)
        }
    })
}

fn exit_gate(config: &SimConfig, time_scale: f64, radius: f64) -> Result<(bool, f64)> {
    let sigma = config.phi().small_jump_variance(config.eps)?.sqrt();
    let ratio = sigma * time_scale.sqrt() / radius;
    Ok((ratio <= EXIT_GATE_RATIO, ratio))
}

/// Largest Euclidean distance from the start seen so far; stops once `stop` is reached.
struct Excursion<'a> {
    start: &'a [f64],
    max_sq: f64,
    stop_sq: f64,
    exited: bool,
}

impl Observer for Excursion<'_> {
    #[inline]
    fn observe(&mut self, _time: f64, position: &[f64]) -> bool {
        let dist_sq: f64 = position.iter().zip(self.start).map(|(p, s)| (p - s) * (p - s)).sum();
        if dist_sq > self.max_sq {
            self.max_sq = dist_sq;
        }
        self.exited = self.max_sq >= self.stop_sq;
        self.exited
    }
}

/// One radius of the exit-tail experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitTailRow {
    pub r: f64,
    pub radius: f64,
    pub exits: u64,
    pub n_paths: u64,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `P̂ · φ(radius) / t` with its interval.
    pub normalized: f64,
    pub normalized_low: f64,
    pub normalized_high: f64,
}

/// Exit probabilities `P(τ_{B(x, r φ⁻¹(t))} < t)` over a list of radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitTailReport {
    pub t: f64,
    pub rows: Vec<ExitTailRow>,
    pub sup_const: f64,
    pub sup_at: f64,
    pub detection_gate: f64,
    pub gate_ok: bool,
    /// Upper interval end of the normalized value at the largest radius over the value at the smallest.
    pub growth: f64,
    /// Largest rise of the normalized value between consecutive radii beyond the interval width.
    pub max_rise_beyond_ci: f64,
    pub verdict: Verdict,
}

/// Largest accepted `growth` in the exit-tail experiment.
pub const MAX_EXIT_GROWTH: f64 = 2.0;

/// Exit probabilities from `x` before time `t` for balls of radius `r φ⁻¹(t)`, `r >= 1`.
///
/// Exits are detected at accepted jumps and at the ends of Brownian intervals. With
/// `Q(r) = P̂ φ(r φ⁻¹(t)) / t`, PASS iff the upper interval end of `Q` at the largest radius
/// is below twice `Q` at the smallest; inconclusive when the detection gate fails or a
/// radius sees no exit.
pub fn exit_time_tail(
    base: &SimConfig,
    process: Process,
    x: &[f64],
    r_list: &[f64],
    t: f64,
) -> Result<ExitTailReport> {
    if r_list.is_empty() || r_list.iter().any(|&r| !(r >= 1.0) || !r.is_finite()) {
        return Err(config("exit radii must be finite and at least 1"));
    }
    let mut radii_r = r_list.to_vec();
    radii_r.sort_by(f64::total_cmp);
    radii_r.dedup();
    let mut cfg = base.clone().with_start(x.to_vec())?;
    cfg.horizon = t;
    cfg.validate()?;
    let phi = cfg.phi().clone();
    let scale = phi.inverse(t)?;
    let radii: Vec<f64> = radii_r.iter().map(|r| r * scale).collect();
    let far = *radii.last().unwrap_or(&scale);
    let sim = Simulator::new(&cfg)?;
    let maxima = map_paths(cfg.n_paths, |i| {
        let mut obs = Excursion { start: &cfg.start, max_sq: 0.0, stop_sq: far * far, exited: false };
        sim.run(process, i, &mut obs)?;
        Ok(obs.max_sq)
    })?;
    let n = cfg.n_paths;
    let rows: Vec<ExitTailRow> = radii_r
        .iter()
        .zip(&radii)
        .map(|(&r, &radius)| {
            let exits = maxima.iter().filter(|&&m| m >= radius * radius).count() as u64;
            let (lo, hi) = wilson_interval(exits, n);
            let p = exits as f64 / n as f64;
            let norm = phi.value(radius) / t;
            ExitTailRow {
                r,
                radius,
                exits,
                n_paths: n,
                probability: p,
                ci_low: lo,
                ci_high: hi,
                normalized: p * norm,
                normalized_low: lo * norm,
                normalized_high: hi * norm,
            }
        })
        .collect();
    let (sup_const, sup_at) = rows
        .iter()
        .map(|row| (row.normalized, row.r))
        .fold((f64::NEG_INFINITY, f64::NAN), |acc, v| if v.0 > acc.0 { v } else { acc });
    let (gate_ok, detection_gate) = exit_gate(&cfg, t, radii[0])?;
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    let growth = last.normalized_high / first.normalized;
    let max_rise_beyond_ci = rows
        .windows(2)
        .map(|w| (w[1].normalized - w[0].normalized) - (w[1].normalized_high - w[1].normalized_low))
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if !gate_ok || last.exits == 0 || first.exits == 0 {
        Verdict::Inconclusive
    } else if sup_const.is_finite() && growth < MAX_EXIT_GROWTH {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ExitTailReport { t, rows, sup_const, sup_at, detection_gate, gate_ok, growth, max_rise_beyond_ci, verdict })
}

/// Moments of the exit time from a ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanExitReport {
    pub r: f64,
    pub horizon: f64,
    pub n_paths: u64,
    pub survivors: u64,
    pub mean: f64,
    pub mean_ci: (f64, f64),
    pub second_moment: f64,
    pub second_moment_ci: (f64, f64),
    /// `E[τ] / φ(r)`.
    pub ratio: f64,
    /// `E[τ²] / φ(r)²`.
    pub ratio_second: f64,
    pub detection_gate: f64,
    pub gate_ok: bool,
    pub verdict: Verdict,
}

/// `E[τ_{B(x, r)}]` and `E[τ²]`; the horizon must be at least `50 φ(r)`.
pub fn mean_exit_time(base: &SimConfig, process: Process, x: &[f64], r: f64) -> Result<MeanExitReport> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(config(format!("exit radius {r} must be positive")));
    }
    let cfg = base.clone().with_start(x.to_vec())?;
    let phi = cfg.phi().clone();
    let time_scale = phi.value(r);
    if cfg.horizon < 50.0 * time_scale {
        return Err(config(format!(
            "horizon {} is below 50 φ(r) = {}",
            cfg.horizon,
            50.0 * time_scale
        )));
    }
    if cfg.eps >= r {
        return Err(config(format!("cutoff {} must be much smaller than the radius {r}", cfg.eps)));
    }
    let sim = Simulator::new(&cfg)?;
    let results = map_paths(cfg.n_paths, |i| {
        let mut obs = Excursion { start: &cfg.start, max_sq: 0.0, stop_sq: r * r, exited: false };
        let path = sim.run(process, i, &mut obs)?;
        Ok((path.end_time, obs.exited))
    })?;
    let survivors = results.iter().filter(|(_, exited)| !exited).count() as u64;
    let times: Vec<f64> = results.iter().map(|(tau, _)| *tau).collect();
    let squares: Vec<f64> = times.iter().map(|t| t * t).collect();
    let (mean, lo, hi) = mean_interval(&times);
    let (m2, lo2, hi2) = mean_interval(&squares);
    let (gate_ok, detection_gate) = exit_gate(&cfg, time_scale, r)?;
    let verdict = if !gate_ok || survivors as f64 > MAX_SURVIVORS * cfg.n_paths as f64 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(MeanExitReport {
        r,
        horizon: cfg.horizon,
        n_paths: cfg.n_paths,
        survivors,
        mean,
        mean_ci: (lo, hi),
        second_moment: m2,
        second_moment_ci: (lo2, hi2),
        ratio: mean / time_scale,
        ratio_second: m2 / (time_scale * time_scale),
        detection_gate,
        gate_ok,
        verdict,
    })
}

/// Exit moments over several radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitMomentsReport {
    pub rows: Vec<MeanExitReport>,
    /// Max over min of `E[τ] / φ(r)` across radii.
    pub spread_first: f64,
    /// Max over min of `E[τ²] / φ(r)²` across radii.
    pub spread_second: f64,
    pub verdict: Verdict,
}

/// Runs [`mean_exit_time`] for each radius with horizon `max(base horizon, 50 φ(r))`.
///
/// PASS iff every radius passes and both normalized moments have spread at most 10.
pub fn exit_moments(base: &SimConfig, process: Process, x: &[f64], r_list: &[f64]) -> Result<ExitMomentsReport> {
    if r_list.is_empty() {
        return Err(config("exit moments need at least one radius"));
    }
    let mut rows = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let mut cfg = base.clone();
        cfg.horizon = cfg.horizon.max(50.0 * base.phi().eval(r)?);
        rows.push(mean_exit_time(&cfg, process, x, r)?);
    }
    let spread = |f: &dyn Fn(&MeanExitReport) -> f64| {
        let max = rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let min = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        max / min
    };
    let spread_first = spread(&|r| r.ratio);
    let spread_second = spread(&|r| r.ratio_second);
    let verdict = if rows.iter().any(|r| r.verdict != Verdict::Pass) {
        Verdict::Inconclusive
    } else if spread_first <= MAX_MOMENT_SPREAD && spread_second <= MAX_MOMENT_SPREAD {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ExitMomentsReport { rows, spread_first, spread_second, verdict })
}

/// Near-diagonal density at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagRow {
    pub t: f64,
    pub scale: f64,
    pub eps: f64,
    pub count: u64,
    pub density: f64,
    pub density_ci: (f64, f64),
    /// `density · φ⁻¹(t)^d`.
    pub normalized: f64,
    pub gate_ratio: f64,
    pub gate_ok: bool,
}

/// On-diagonal scan over several times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagReport {
    pub rows: Vec<DiagRow>,
    pub slope: f64,
    pub expected_slope: Option<f64>,
    pub spread: f64,
    pub verdict: Verdict,
}

/// Half-width of the near-diagonal cell in units of `φ⁻¹(t)`.
pub const DIAG_HALF_WIDTH: f64 = 0.125;

/// Density in the cell `|Δ^i| <= φ⁻¹(t)/8` for each `t`, its scaling slope and normalized spread.
///
/// Each time uses its own derived seed, so the rows are independent samples.
pub fn on_diagonal_check(base: &SimConfig, process: Process, t_list: &[f64], cutoff: Cutoff) -> Result<DiagReport> {
    let mut times = t_list.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 2 || times.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(config("on-diagonal scan needs at least two positive times"));
    }
    if times[times.len() - 1] / times[0] < 10.0 {
        return Err(config("on-diagonal times must span at least a factor of 10"));
    }
    let d = base.dim();
    let phi = base.phi().clone();
    let mut rows = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let scale = phi.inverse(t)?;
        let mut cfg = base.clone();
        cfg.base_seed = derive_seed(base.base_seed, k as u64);
        cfg.horizon = t;
        cfg.eps = cutoff.at(scale);
        cfg.validate()?;
        let (gate_ok, gate_ratio) = density_gate(&cfg, scale)?;
        let sim = Simulator::new(&cfg)?;
        let half = DIAG_HALF_WIDTH * scale;
        let hits = map_paths(cfg.n_paths, |i| {
            let end = sim.run(process, i, &mut Terminal)?.terminal;
            Ok(end.iter().zip(&cfg.start).all(|(a, b)| (a - b).abs() <= half))
        })?;
        let count = hits.iter().filter(|&&h| h).count() as u64;
        let volume = (2.0 * half).powi(d as i32);
        let (lo, hi) = wilson_interval(count, cfg.n_paths);
        let density = count as f64 / (cfg.n_paths as f64 * volume);
        rows.push(DiagRow {
            t,
            scale,
            eps: cfg.eps,
            count,
            density,
            density_ci: (lo / volume, hi / volume),
            normalized: density * scale.powi(d as i32),
            gate_ratio,
            gate_ok,
        });
    }
    let fit: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.count > 0).map(|r| (r.t.ln(), r.density.ln())).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
    let slope = if xs.len() >= 2 { linear_fit(&xs, &ys).0 } else { f64::NAN };
    let max = rows.iter().map(|r| r.normalized).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
    let spread = max / min;
    let cert = phi.certificate();
    let expected_slope = (cert.alpha_lower == cert.alpha_upper).then(|| -(d as f64) / cert.alpha_lower);
    let slope_ok = expected_slope.is_none_or(|e| (slope - e).abs() <= SLOPE_TOL);
    let verdict = if rows.iter().any(|r| r.count < TRUSTED_COUNT || !r.gate_ok) {
        Verdict::Inconclusive
    } else if spread <= MAX_DIAG_SPREAD && slope_ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(DiagReport { rows, slope, expected_slope, spread, verdict })
}
