//! Event-driven simulation of the product process Z and the thinned process X.
//!
//! Jumps of size at least `eps` are simulated exactly as a compound Poisson stream;
//! smaller jumps are either dropped or replaced by a variance-matched Brownian part
//! added over every interval between proposals.

mod rng;
mod stable;

pub use rng::{derive_seed, stream, Channel, PathStreams};
pub use stable::{cauchy_cdf, exact_stable_sample, stable_char_constant};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{config, domain, Error, Result};
use crate::kernels::KernelSpec;
use crate::scaling::{ScalingFunction, TailSampler};

/// Expected number of proposals per path above which a configuration is rejected.
pub const MAX_EXPECTED_JUMPS: f64 = 1e7;

/// Treatment of jumps smaller than the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMode {
    Drop,
    Gaussian,
}

/// Which process a path realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Process {
    /// Independent coordinates with jump kernel `J^φ`; the multiplier is ignored.
    Z,
    /// Jump kernel `λ J^φ`, obtained by thinning proposals from `Λ J^φ`.
    X,
}

/// Parameters shared by every path of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub spec: KernelSpec,
    pub eps: f64,
    pub horizon: f64,
    pub small_jump_mode: SmallJumpMode,
    pub n_paths: u64,
    pub base_seed: u64,
    pub start: Vec<f64>,
    pub record_events: bool,
}

impl SimConfig {
    pub fn new(spec: KernelSpec, eps: f64, horizon: f64, n_paths: u64, base_seed: u64) -> Result<Self> {
        let start = vec![0.0; spec.dim()];
        let cfg = Self {
            spec,
            eps,
            horizon,
            small_jump_mode: SmallJumpMode::Gaussian,
            n_paths,
            base_seed,
            start,
            record_events: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn phi(&self) -> &ScalingFunction {
        self.spec.phi()
    }

    pub fn with_mode(mut self, mode: SmallJumpMode) -> Self {
        self.small_jump_mode = mode;
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        self.start = start;
        self.validate()?;
        Ok(self)
    }

    pub fn with_events(mut self, record: bool) -> Self {
        self.record_events = record;
        self
    }

    /// Checks every precondition, including the expected proposal count.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(config(format!("cutoff eps = {} must be positive and finite", self.eps)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(config(format!("horizon {} must be positive and finite", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(config("n_paths must be at least 1"));
        }
        if self.start.len() != self.dim() {
            return Err(config(format!(
                "start point has {} coordinates, dimension is {}",
                self.start.len(),
                self.dim()
            )));
        }
        self.spec.validate_bounds()?;
        let expected = self.expected_proposals()?;
        if !(expected <= MAX_EXPECTED_JUMPS) {
            return Err(config(format!(
                "expected {expected:.3e} proposals per path exceeds {MAX_EXPECTED_JUMPS:e}; raise eps or shorten the horizon"
            )));
        }
        Ok(())
    }

    /// `2 d Λ N(eps) T`, the mean number of proposals for X (an upper bound for Z).
    pub fn expected_proposals(&self) -> Result<f64> {
        let n = self.phi().tail_mass(self.eps)?;
        Ok(2.0 * self.dim() as f64 * self.spec.lambda_bound() * n * self.horizon)
    }
}

/// One proposed jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    pub axis: usize,
    pub size: f64,
    pub accepted: bool,
}

/// Counters kept for every path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub proposed: u64,
    pub accepted: u64,
    pub gaussian_increments: u64,
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub start: Vec<f64>,
    /// Proposed jumps in time order; filled only when event recording is on.
    pub events: Vec<JumpEvent>,
    pub terminal: Vec<f64>,
    pub horizon: f64,
    /// Time at which the simulation stopped; below `horizon` only when an observer stopped it.
    pub end_time: f64,
    pub diagnostics: Diagnostics,
}

/// Receives the position after every accepted jump and every Gaussian interval.
pub trait Observer {
    /// Returns `true` to stop the path at `time`.
    fn observe(&mut self, time: f64, position: &[f64]) -> bool;

    /// Whether intermediate positions matter; when they do not, Z adds its Gaussian part
    /// as a single increment at the horizon.
    fn watches_path(&self) -> bool {
        true
    }
}

/// Observer that never stops a path.
pub struct Terminal;

impl Observer for Terminal {
    #[inline]
    fn observe(&mut self, _time: f64, _position: &[f64]) -> bool {
        false
    }

    fn watches_path(&self) -> bool {
        false
    }
}

/// Precomputed rates and samplers for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    sampler: TailSampler,
    /// Total proposal rate `2 d Λ N(eps)` for X.
    x_rate: f64,
    /// Total proposal rate `2 d N(eps)` for Z.
    z_rate: f64,
    sigma_sq: f64,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let phi = config.phi();
        let sampler = TailSampler::new(phi, config.eps)?;
        let z_rate = 2.0 * config.dim() as f64 * sampler.mass();
        let sigma_sq = match config.small_jump_mode {
            SmallJumpMode::Drop => 0.0,
            SmallJumpMode::Gaussian => phi.small_jump_variance(config.eps)?,
        };
        Ok(Self {
            config: config.clone(),
            sampler,
            x_rate: z_rate * config.spec.lambda_bound(),
            z_rate,
            sigma_sq,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Variance rate of the Brownian substitute per coordinate for Z.
    pub fn small_jump_variance(&self) -> f64 {
        self.sigma_sq
    }

    pub fn proposal_rate(&self, process: Process) -> f64 {
        match process {
            Process::Z => self.z_rate,
            Process::X => self.x_rate,
        }
    }

    /// Simulates path `path_index` up to the horizon or until `observer` stops it.
    pub fn run<O: Observer>(&self, process: Process, path_index: u64, observer: &mut O) -> Result<PathSample> {
        let cfg = &self.config;
        let d = cfg.dim();
        let horizon = cfg.horizon;
        let rate = self.proposal_rate(process);
        let bound = cfg.spec.lambda_bound();
        let floor = bound.powi(-2) * (1.0 - 1e-12);
        let mut streams = PathStreams::new(cfg.base_seed, path_index);
        let mut x = cfg.start.clone();
        let mut target = x.clone();
        let mut events = Vec::new();
        let mut diag = Diagnostics::default();
        let mut t = 0.0;
        let mut end_time = horizon;
        let lumped = process == Process::Z && !observer.watches_path();
        loop {
            let wait: f64 = Exp1.sample(&mut streams.times);
            let next = if rate > 0.0 { t + wait / rate } else { f64::INFINITY };
            let until = next.min(horizon);
            if self.sigma_sq > 0.0 && !lumped && until > t {
                let local = match process {
                    Process::Z => 1.0,
                    Process::X => cfg.spec.multiplier_at(&x, &x)?,
                };
                let sd = (self.sigma_sq * local * (until - t)).sqrt();
                for xi in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut streams.gaussian);
                    *xi += sd * z;
                }
                diag.gaussian_increments += 1;
                if observer.observe(until, &x) {
                    end_time = until;
                    break;
                }
            }
            if next >= horizon {
                break;
            }
            t = next;
            let axis = if d == 1 { 0 } else { streams.axes.random_range(0..d) };
            let magnitude = self.sampler.sample(streams.magnitudes.random::<f64>());
            let size = if streams.signs.random::<bool>() { magnitude } else { -magnitude };
            diag.proposed += 1;
            let accepted = match process {
                Process::Z => true,
                Process::X => {
                    target.copy_from_slice(&x);
                    target[axis] += size;
                    let p = cfg.spec.multiplier_at(&x, &target)? / bound;
                    if !(p >= floor && p <= 1.0 + 1e-12) {
                        return Err(Error::Invariant(format!(
                            "acceptance probability {p} outside [{}, 1]",
                            bound.powi(-2)
                        )));
                    }
                    streams.thinning.random::<f64>() < p
                }
            };
            if cfg.record_events {
                events.push(JumpEvent { time: t, axis, size, accepted });
            }
            if accepted {
                x[axis] += size;
                diag.accepted += 1;
                if observer.observe(t, &x) {
                    end_time = t;
                    break;
                }
            }
        }
        if lumped && self.sigma_sq > 0.0 {
            let sd = (self.sigma_sq * horizon).sqrt();
            for xi in x.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut streams.gaussian);
                *xi += sd * z;
            }
            diag.gaussian_increments += 1;
        }
        Ok(PathSample { start: cfg.start.clone(), events, terminal: x, horizon, end_time, diagnostics: diag })
    }

    /// Terminal position only.
    pub fn terminal(&self, process: Process, path_index: u64) -> Result<Vec<f64>> {
        Ok(self.run(process, path_index, &mut Terminal)?.terminal)
    }
}

/// Path `path_index` of Z under `config`.
pub fn sample_z_path(config: &SimConfig, path_index: u64) -> Result<PathSample> {
    Simulator::new(config)?.run(Process::Z, path_index, &mut Terminal)
}

/// Path `path_index` of X under `config`.
pub fn sample_x_path(config: &SimConfig, path_index: u64) -> Result<PathSample> {
    Simulator::new(config)?.run(Process::X, path_index, &mut Terminal)
}

/// Space-time rescaling `Y_t = κ⁻¹ X_{φ(κ) t}` applied to a recorded path.
pub fn rescale_path(path: &PathSample, kappa: f64, phi: &ScalingFunction) -> Result<PathSample> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(domain(format!("rescale needs a positive κ, got {kappa}")));
    }
    let time_scale = phi.value(kappa);
    let shrink = |v: &[f64]| v.iter().map(|x| x / kappa).collect::<Vec<_>>();
    Ok(PathSample {
        start: shrink(&path.start),
        events: path
            .events
            .iter()
            .map(|e| JumpEvent { time: e.time / time_scale, size: e.size / kappa, ..*e })
            .collect(),
        terminal: shrink(&path.terminal),
        horizon: path.horizon / time_scale,
        end_time: path.end_time / time_scale,
        diagnostics: path.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Multiplier;

    fn cauchy(d: usize) -> KernelSpec {
        KernelSpec::reference(ScalingFunction::power_law(1.0, 1.0).unwrap(), d).unwrap()
    }

    #[test]
    fn huge_cutoff_in_drop_mode_stays_put() {
        let cfg = SimConfig::new(cauchy(2), 1e12, 1.0, 1, 5)
            .unwrap()
            .with_mode(SmallJumpMode::Drop)
            .with_start(vec![0.5, -1.0])
            .unwrap();
        for i in 0..50 {
            let p = sample_z_path(&cfg, i).unwrap();
            assert_eq!(p.terminal, vec![0.5, -1.0]);
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let cfg = SimConfig::new(cauchy(2), 0.05, 1.0, 1, 99).unwrap().with_events(true);
        let a = sample_z_path(&cfg, 17).unwrap();
        let b = sample_z_path(&cfg, 17).unwrap();
        assert_eq!(a, b);
        let c = sample_z_path(&cfg, 18).unwrap();
        assert_ne!(a.terminal, c.terminal);
    }

    #[test]
    fn path_invariants_hold() {
        let spec = KernelSpec::new(
            ScalingFunction::power_law(1.0, 1.0).unwrap(),
            2.0,
            Multiplier::Checkerboard { period: 1.0, low: 0.5, high: 2.0 },
            2,
        )
        .unwrap();
        let cfg = SimConfig::new(spec, 0.05, 2.0, 1, 3)
            .unwrap()
            .with_mode(SmallJumpMode::Drop)
            .with_events(true);
        for i in 0..20 {
            let p = sample_x_path(&cfg, i).unwrap();
            let mut pos = p.start.clone();
            let mut last = 0.0;
            for e in &p.events {
                assert!(e.time > last && e.time <= cfg.horizon);
                last = e.time;
                assert!(e.size.abs() >= cfg.eps);
                if e.accepted {
                    pos[e.axis] += e.size;
                }
            }
            assert_eq!(pos, p.terminal);
            assert_eq!(p.diagnostics.proposed as usize, p.events.len());
        }
    }

    #[test]
    fn rate_overflow_is_a_config_error() {
        let err = SimConfig::new(cauchy(1), 1e-9, 10.0, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rescale_scales_times_and_sizes() {
        let phi = ScalingFunction::power_law(1.5, 1.0).unwrap();
        let spec = KernelSpec::reference(phi.clone(), 1).unwrap();
        let cfg = SimConfig::new(spec, 0.1, 1.0, 1, 1).unwrap().with_events(true);
        let path = sample_z_path(&cfg, 0).unwrap();
        let same = rescale_path(&path, 1.0, &phi).unwrap();
        assert_eq!(same, path);
        let kappa = 3.0;
        let scaled = rescale_path(&path, kappa, &phi).unwrap();
        for (a, b) in path.events.iter().zip(&scaled.events) {
            assert_eq!(b.size, a.size / kappa);
            assert_eq!(b.time, a.time / kappa.powf(1.5));
        }
        assert_eq!(scaled.horizon, 1.0 / kappa.powf(1.5));
    }
}
