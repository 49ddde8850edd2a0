//! Experiment configuration files (TOML) with strict keys and line-anchored errors.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Multiplier};
use crate::scaling::{PowerTerm, ScalingFunction};
use crate::simulate::{Process, SimConfig, SmallJumpMode};
use crate::verify::Cutoff;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "ANISO_SEED";
/// Environment variable hinting the worker count.
pub const WORKERS_ENV: &str = "ANISO_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Envelope,
    Exit,
    Diag,
    Ladder,
    Nash,
    Boxes,
    PhiCheck,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Envelope => "envelope",
            ExperimentKind::Exit => "exit",
            ExperimentKind::Diag => "diag",
            ExperimentKind::Ladder => "ladder",
            ExperimentKind::Nash => "nash",
            ExperimentKind::Boxes => "boxes",
            ExperimentKind::PhiCheck => "phi-check",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub c: f64,
    pub alpha: f64,
}

/// `family = "power" | "sum" | "table"` with the keys of that family.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSection {
    pub family: String,
    pub alpha: Option<f64>,
    pub scale: Option<f64>,
    pub terms: Option<Vec<TermSection>>,
    pub path: Option<PathBuf>,
    pub points: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub dim: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Multiplier in the `kind:key=value,...` form.
    pub multiplier: Option<String>,
    pub truncation: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessName {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Drop,
    Gaussian,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub process: ProcessName,
    pub n_paths: u64,
    pub eps: f64,
    pub horizon: Option<f64>,
    #[serde(default = "gaussian")]
    pub small_jumps: ModeName,
    pub start: Option<Vec<f64>>,
}

fn gaussian() -> ModeName {
    ModeName::Gaussian
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSection {
    pub t: f64,
    /// Time at which the envelope is evaluated; differs from `t` only for negative controls.
    pub envelope_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExitMode {
    Tail,
    Moments,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitSection {
    pub mode: ExitMode,
    pub radii: Vec<f64>,
    /// Time of the tail experiment.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffName {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagSection {
    pub times: Vec<f64>,
    pub cutoff: CutoffName,
    /// Absolute cutoff or fraction of `φ⁻¹(t)`.
    pub cutoff_value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub d: usize,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    /// Number of randomized case-inequality configurations.
    #[serde(default)]
    pub cases: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxesSection {
    pub d: usize,
    pub k_max: u32,
    pub points: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiCheckSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_delta")]
    pub delta_max: u32,
}

fn default_samples() -> usize {
    200
}

fn default_delta() -> u32 {
    40
}

/// Raw contents of a configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Spanned<ExperimentKind>>,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub phi: Option<Spanned<PhiSection>>,
    pub kernel: Option<Spanned<KernelSection>>,
    pub simulation: Option<Spanned<SimulationSection>>,
    pub envelope: Option<EnvelopeSection>,
    pub exit: Option<ExitSection>,
    pub diag: Option<DiagSection>,
    pub ladder: Option<LadderSection>,
    pub boxes: Option<BoxesSection>,
    pub phi_check: Option<PhiCheckSection>,
}

/// Parsed configuration with its digest and source text for error anchoring.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub source: String,
    pub origin: String,
    pub digest: String,
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// 64-bit hex digest of the canonical JSON form of a parsed TOML table.
pub fn digest_table(table: &toml::Table) -> Result<String> {
    let canonical = serde_json::to_string(table).map_err(|e| Error::Internal(format!("digest: {e}")))?;
    let hash = Sha256::digest(canonical.as_bytes());
    Ok(hash[..8].iter().map(|b| format!("{b:02x}")).collect())
}

impl ExperimentConfig {
    /// Reads and parses a configuration file; `ANISO_SEED` overrides the seed.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read: {e}", path.display())))?;
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        Self::parse(&text, &path.display().to_string(), seed)
    }

    /// Parses configuration text; `origin` names the source in messages.
    pub fn parse(text: &str, origin: &str, seed_override: Option<u64>) -> Result<Self> {
        let mut raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            Error::Config(format!("{origin}:{line}:{col}: {}", e.message().trim()))
        })?;
        let mut table: toml::Table = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{origin}: {}", e.message().trim())))?;
        if let Some(seed) = seed_override {
            raw.seed = seed;
            let value = i64::try_from(seed).map_err(|_| Error::Config(format!("seed {seed} exceeds i64 range")))?;
            table.insert("seed".into(), toml::Value::Integer(value));
        }
        table.remove("workers");
        table.remove("output");
        table.remove("csv");
        let digest = digest_table(&table)?;
        Ok(Self { raw, source: text.to_string(), origin: origin.to_string(), digest })
    }

    /// Configuration error anchored at a byte span of the source.
    pub fn error_at(&self, span: Range<usize>, msg: impl std::fmt::Display) -> Error {
        let (line, col) = line_col(&self.source, span.start);
        Error::Config(format!("{}:{line}:{col}: {msg}", self.origin))
    }

    fn error_top(&self, msg: impl std::fmt::Display) -> Error {
        match &self.raw.experiment {
            Some(kind) => self.error_at(kind.span(), msg),
            None => Error::Config(format!("{}:1:1: {msg}", self.origin)),
        }
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.raw.experiment.as_ref().map(|k| *k.get_ref()).ok_or_else(|| self.error_top("missing `experiment` key"))
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed
    }

    /// `ANISO_WORKERS` if set, else the configured hint.
    pub fn workers(&self) -> Result<Option<usize>> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
            Err(_) => Ok(self.raw.workers),
        }
    }

    pub fn phi(&self) -> Result<ScalingFunction> {
        let section = self.raw.phi.as_ref().ok_or_else(|| self.error_top("missing [phi] table"))?;
        let at = |msg: String| self.error_at(section.span(), msg);
        let p = section.get_ref();
        let built = match p.family.as_str() {
            "power" => {
                let alpha = p.alpha.ok_or_else(|| at("power family needs `alpha`".into()))?;
                ScalingFunction::power_law(alpha, p.scale.unwrap_or(1.0))
            }
            "sum" => {
                let terms = p.terms.as_ref().ok_or_else(|| at("sum family needs `terms`".into()))?;
                ScalingFunction::sum_of_powers(terms.iter().map(|t| PowerTerm { c: t.c, alpha: t.alpha }).collect())
            }
            "table" => match (&p.path, &p.points) {
                (Some(path), None) => ScalingFunction::from_csv(path),
                (None, Some(points)) => ScalingFunction::tabulated(points),
                _ => return Err(at("table family needs exactly one of `path` or `points`".into())),
            },
            other => return Err(at(format!("unknown phi family `{other}` (expected power, sum or table)"))),
        };
        built.map_err(|e| at(e.to_string()))
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        let phi = self.phi()?;
        let section = self.raw.kernel.as_ref().ok_or_else(|| self.error_top("missing [kernel] table"))?;
        let at = |msg: String| self.error_at(section.span(), msg);
        let k = section.get_ref();
        let multiplier = match &k.multiplier {
            Some(m) => Multiplier::parse(m).map_err(|e| at(e.to_string()))?,
            None => Multiplier::Constant { c: 1.0 },
        };
        let spec = KernelSpec::new(phi, k.lambda, multiplier, k.dim).map_err(|e| at(e.to_string()))?;
        match k.truncation {
            Some(lam) => spec.truncate(lam).map_err(|e| at(e.to_string())),
            None => Ok(spec),
        }
    }

    /// Simulation parameters; `horizon` overrides the configured horizon.
    pub fn simulation(&self, horizon: Option<f64>) -> Result<(SimConfig, Process)> {
        let spec = self.kernel()?;
        let section = self.raw.simulation.as_ref().ok_or_else(|| self.error_top("missing [simulation] table"))?;
        let at = |msg: String| self.error_at(section.span(), msg);
        let s = section.get_ref();
        let horizon = horizon.or(s.horizon).ok_or_else(|| at("simulation needs `horizon`".into()))?;
        let mode = match s.small_jumps {
            ModeName::Drop => SmallJumpMode::Drop,
            ModeName::Gaussian => SmallJumpMode::Gaussian,
        };
        let process = match s.process {
            ProcessName::Z => Process::Z,
            ProcessName::X => Process::X,
        };
        let mut cfg = SimConfig::new(spec, s.eps, horizon, s.n_paths, self.raw.seed)
            .map_err(|e| at(e.to_string()))?
            .with_mode(mode);
        if let Some(start) = &s.start {
            cfg = cfg.with_start(start.clone()).map_err(|e| at(e.to_string()))?;
        }
        Ok((cfg, process))
    }

    pub fn section<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| self.error_top(format!("missing [{name}] table")))
    }

    pub fn cutoff(&self, diag: &DiagSection) -> Cutoff {
        match diag.cutoff {
            CutoffName::Absolute => Cutoff::Absolute(diag.cutoff_value),
            CutoffName::Relative => Cutoff::Relative(diag.cutoff_value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENVELOPE: &str = r#"
experiment = "envelope"
seed = 3

[phi]
family = "power"
alpha = 1.0

[kernel]
dim = 2

[simulation]
process = "z"
n_paths = 10
eps = 0.01

[envelope]
t = 1.0
"#;

    #[test]
    fn parses_and_digests() {
        let cfg = ExperimentConfig::parse(ENVELOPE, "env.toml", None).unwrap();
        assert_eq!(cfg.kind().unwrap(), ExperimentKind::Envelope);
        assert_eq!(cfg.digest.len(), 16);
        let again = ExperimentConfig::parse(ENVELOPE, "other.toml", None).unwrap();
        assert_eq!(cfg.digest, again.digest);
        let reseeded = ExperimentConfig::parse(ENVELOPE, "env.toml", Some(4)).unwrap();
        assert_ne!(cfg.digest, reseeded.digest);
        assert_eq!(reseeded.seed(), 4);
        let (sim, process) = cfg.simulation(Some(1.0)).unwrap();
        assert_eq!(process, Process::Z);
        assert_eq!(sim.n_paths, 10);
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let text = ENVELOPE.replace("alpha = 1.0", "alpha = 1.0\nalpah = 2.0");
        let err = ExperimentConfig::parse(&text, "env.toml", None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("env.toml:8:1:") && msg.contains("alpah"), "{msg}");
    }

    #[test]
    fn missing_family_is_line_anchored() {
        let text = ENVELOPE.replace("family = \"power\"\n", "");
        let err = ExperimentConfig::parse(&text, "env.toml", None).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("env.toml:") && msg.contains("family"), "{msg}");
    }

    #[test]
    fn missing_phi_table_reported() {
        let text = ENVELOPE.replace("[phi]\nfamily = \"power\"\nalpha = 1.0\n", "");
        let cfg = ExperimentConfig::parse(&text, "env.toml", None).unwrap();
        let msg = cfg.kernel().unwrap_err().to_string();
        assert!(msg.contains("env.toml:2:") && msg.contains("[phi]"), "{msg}");
    }
}
