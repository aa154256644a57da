//! Run configuration: a TOML file merged with command-line overrides, then
//! resolved into concrete values with every default filled in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qho_core::chain::MeasurementScheme;
use qho_core::grid::{DEFAULT_POINTS, DEFAULT_STEPS_PER_PERIOD};
use qho_core::{ChainConfig, OscillatorParams, WavePacket};

use crate::ConfigError;

pub const DEFAULT_MASS: f64 = 1.0;
pub const DEFAULT_OMEGA: f64 = 0.707;
pub const DEFAULT_TAU_M: f64 = 0.2;
pub const DEFAULT_SIGMA_M: f64 = 0.5;
pub const DEFAULT_N: usize = 500_000;
pub const DEFAULT_WEAK_GAP_TOL: f64 = 0.05;
pub const DEFAULT_VALIDATE_GRID_MEASUREMENTS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Chain,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Collapse {
    #[default]
    Replace,
    Weak,
}

impl From<Collapse> for qho_core::CollapseMode {
    fn from(c: Collapse) -> Self {
        match c {
            Collapse::Replace => qho_core::CollapseMode::Replace,
            Collapse::Weak => qho_core::CollapseMode::WeakProduct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A sweep axis as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl AxisSpec {
    /// `MIN:MAX:COUNT[:log|:linear]`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = text.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(ConfigError(format!("axis `{text}`: expected MIN:MAX:COUNT[:log]")));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| ConfigError(format!("axis `{text}`: {e}")))
        };
        let count = parts[2]
            .parse::<usize>()
            .map_err(|e| ConfigError(format!("axis `{text}`: {e}")))?;
        let spacing = match parts.get(3).copied() {
            None | Some("linear") | Some("lin") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(ConfigError(format!("axis `{text}`: unknown spacing `{other}`"))),
        };
        Ok(Self {
            min: num(parts[0])?,
            max: num(parts[1])?,
            count,
            spacing,
        })
    }

    pub fn validate(&self, name: &str) -> Result<(), ConfigError> {
        if self.count < 2 {
            return Err(ConfigError(format!("{name} axis needs count >= 2, got {}", self.count)));
        }
        if !(self.max > self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(ConfigError(format!("{name} axis needs min < max")));
        }
        // Linear axes may touch zero; those cells are flagged, not rejected.
        if self.spacing == Spacing::Log && !(self.min > 0.0) {
            return Err(ConfigError(format!("{name} log axis needs min > 0")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + f * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + f * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSection {
    pub mass: Option<f64>,
    pub omega: Option<f64>,
    pub hbar: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub t_m: Option<f64>,
    pub tau_m: Option<f64>,
    pub sigma_m: Option<f64>,
    pub varsigma_m: Option<f64>,
    pub jitter_std: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub center: Option<f64>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: Option<usize>,
    pub steps_per_period: Option<usize>,
    pub half_width: Option<f64>,
    /// Dump grid densities every this many measurements (0 = never).
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub varsigma_m: Option<AxisSpec>,
    pub tau_m: Option<AxisSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub weak_gap_tol: Option<f64>,
    pub grid_measurements: Option<usize>,
}

/// Everything the config file may contain. All fields are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub oscillator: OscillatorSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub n_measurements: Option<usize>,
    pub seed: Option<u64>,
    pub engine: Option<Engine>,
    pub collapse: Option<Collapse>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }
}

/// Command-line overrides. A flag naming one member of an exclusive pair
/// (`t_m`/`tau_m`, `sigma_m`/`varsigma_m`) clears the other one from the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed (falls back to $QHO_SEED, then 0).
    #[arg(long, global = true, env = "QHO_SEED")]
    pub seed: Option<u64>,
    /// Measurement period as a fraction of the oscillator period.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau_m: Option<f64>,
    /// Instrument width in units of sqrt(hbar / (m omega)).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub varsigma_m: Option<f64>,
    /// Measurement period (time units).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_m: Option<f64>,
    /// Instrument width (length units).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma_m: Option<f64>,
    /// Angular frequency
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Particle mass
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mass: Option<f64>,
    /// Reduced Planck constant
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub hbar: Option<f64>,
    /// Number of measurements.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Standard deviation of the Gaussian jitter on each period.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub jitter_std: Option<f64>,
    /// Closed-form Gaussian chain or the grid Schrödinger solver
    #[arg(long, global = true, value_enum)]
    pub engine: Option<Engine>,
    /// Post-measurement update used by the grid engine
    #[arg(long, global = true, value_enum)]
    pub collapse: Option<Collapse>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Grid points (power of two) for the grid engine.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Time steps per oscillator period for the grid engine.
    #[arg(long, global = true)]
    pub steps_per_period: Option<usize>,
    /// Dump grid densities every K measurements.
    #[arg(long, global = true)]
    pub snapshot_every: Option<usize>,
    /// Sweep axis for varsigma_M, MIN:MAX:COUNT[:log].
    #[arg(long, global = true)]
    pub varsigma_range: Option<String>,
    /// Sweep axis for tau_M, MIN:MAX:COUNT[:log].
    #[arg(long, global = true)]
    pub tau_range: Option<String>,
    /// Largest accepted relative std gap between replace and weak collapse.
    #[arg(long, global = true)]
    pub weak_gap_tol: Option<f64>,
}

impl Overrides {
    pub fn merge(&self) -> Result<RawConfig, ConfigError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        let o = &mut raw.oscillator;
        set(&mut o.mass, self.mass);
        set(&mut o.omega, self.omega);
        set(&mut o.hbar, self.hbar);
        let s = &mut raw.scheme;
        if self.t_m.is_some() || self.tau_m.is_some() {
            s.t_m = self.t_m;
            s.tau_m = self.tau_m;
        }
        if self.sigma_m.is_some() || self.varsigma_m.is_some() {
            s.sigma_m = self.sigma_m;
            s.varsigma_m = self.varsigma_m;
        }
        set(&mut s.jitter_std, self.jitter_std);
        set(&mut raw.n_measurements, self.n);
        set(&mut raw.seed, self.seed);
        set(&mut raw.engine, self.engine);
        set(&mut raw.collapse, self.collapse);
        set(&mut raw.out, self.out.clone());
        set(&mut raw.grid.points, self.grid_points);
        set(&mut raw.grid.steps_per_period, self.steps_per_period);
        set(&mut raw.grid.snapshot_every, self.snapshot_every);
        if let Some(text) = &self.varsigma_range {
            raw.sweep.varsigma_m = Some(AxisSpec::parse(text)?);
        }
        if let Some(text) = &self.tau_range {
            raw.sweep.tau_m = Some(AxisSpec::parse(text)?);
        }
        set(&mut raw.validate.weak_gap_tol, self.weak_gap_tol);
        Ok(raw)
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

/// Fully resolved configuration; serialised verbatim into every summary, and
/// loadable again as a config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub oscillator: ResolvedOscillator,
    pub scheme: ResolvedScheme,
    pub initial: ResolvedInitial,
    pub n_measurements: usize,
    pub seed: u64,
    pub engine: Engine,
    pub collapse: Collapse,
    pub out: PathBuf,
    pub grid: ResolvedGrid,
    pub validate: ResolvedValidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedOscillator {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
}

/// Only the dimensional pair is echoed, so the echo is an unambiguous config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedScheme {
    pub t_m: f64,
    pub sigma_m: f64,
    pub jitter_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedInitial {
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedGrid {
    pub points: usize,
    pub steps_per_period: usize,
    /// `None` means `±max(12 σ∞, 12 σ_gs)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedValidate {
    pub weak_gap_tol: f64,
    pub grid_measurements: usize,
}

fn exclusive(
    dim: Option<f64>,
    nondim: Option<f64>,
    names: (&str, &str),
    default_nondim: f64,
    scale: f64,
) -> Result<f64, ConfigError> {
    match (dim, nondim) {
        (Some(_), Some(_)) => Err(ConfigError(format!(
            "give exactly one of {} and {}",
            names.0, names.1
        ))),
        (Some(v), None) => Ok(v),
        (None, Some(v)) => Ok(v * scale),
        (None, None) => Ok(default_nondim * scale),
    }
}

impl RunConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self, ConfigError> {
        let mass = raw.oscillator.mass.unwrap_or(DEFAULT_MASS);
        let omega = raw.oscillator.omega.unwrap_or(DEFAULT_OMEGA);
        let hbar = raw.oscillator.hbar.unwrap_or(1.0);
        let params = OscillatorParams::new(mass, omega, hbar).map_err(ConfigError::from_core)?;

        let t_m = exclusive(
            raw.scheme.t_m,
            raw.scheme.tau_m,
            ("t_m", "tau_m"),
            DEFAULT_TAU_M,
            params.period(),
        )?;
        let sigma_m = match (raw.scheme.sigma_m, raw.scheme.varsigma_m) {
            (None, None) => DEFAULT_SIGMA_M,
            (d, n) => exclusive(d, n, ("sigma_m", "varsigma_m"), 0.0, params.sigma_gs())?,
        };
        let jitter_std = raw.scheme.jitter_std.unwrap_or(0.0);
        MeasurementScheme::with_jitter(t_m, sigma_m, jitter_std).map_err(ConfigError::from_core)?;

        let center = raw.initial.center.unwrap_or(0.0);
        let width = raw
            .initial
            .width
            .unwrap_or(params.sigma_gs() / std::f64::consts::SQRT_2);
        WavePacket::new(center, width).map_err(ConfigError::from_core)?;

        let n_measurements = raw.n_measurements.unwrap_or(DEFAULT_N);
        if n_measurements == 0 {
            return Err(ConfigError("n_measurements must be at least 1".into()));
        }
        let grid = ResolvedGrid {
            points: raw.grid.points.unwrap_or(DEFAULT_POINTS),
            steps_per_period: raw.grid.steps_per_period.unwrap_or(DEFAULT_STEPS_PER_PERIOD),
            half_width: raw.grid.half_width,
            snapshot_every: raw.grid.snapshot_every.unwrap_or(0),
        };
        if !grid.points.is_power_of_two() || grid.points < qho_core::grid::MIN_POINTS {
            return Err(ConfigError(format!(
                "grid points must be a power of two >= {}, got {}",
                qho_core::grid::MIN_POINTS,
                grid.points
            )));
        }
        if grid.steps_per_period == 0 {
            return Err(ConfigError("steps_per_period must be at least 1".into()));
        }
        let validate = ResolvedValidate {
            weak_gap_tol: raw.validate.weak_gap_tol.unwrap_or(DEFAULT_WEAK_GAP_TOL),
            grid_measurements: raw
                .validate
                .grid_measurements
                .unwrap_or(DEFAULT_VALIDATE_GRID_MEASUREMENTS),
        };
        if !(validate.weak_gap_tol > 0.0) {
            return Err(ConfigError("weak_gap_tol must be positive".into()));
        }
        Ok(Self {
            oscillator: ResolvedOscillator { mass, omega, hbar },
            scheme: ResolvedScheme {
                t_m,
                sigma_m,
                jitter_std,
            },
            initial: ResolvedInitial { center, width },
            n_measurements,
            seed: raw.seed.unwrap_or(0),
            engine: raw.engine.unwrap_or_default(),
            collapse: raw.collapse.unwrap_or_default(),
            out: raw.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            grid,
            validate,
        })
    }

    pub fn params(&self) -> OscillatorParams<f64> {
        let o = self.oscillator;
        OscillatorParams::new(o.mass, o.omega, o.hbar).expect("validated in resolve")
    }

    pub fn scheme(&self) -> MeasurementScheme<f64> {
        let s = self.scheme;
        MeasurementScheme::with_jitter(s.t_m, s.sigma_m, s.jitter_std).expect("validated in resolve")
    }

    pub fn initial(&self) -> WavePacket<f64> {
        WavePacket::new(self.initial.center, self.initial.width).expect("validated in resolve")
    }

    pub fn chain_config(&self) -> ChainConfig<f64> {
        ChainConfig::new(
            self.params(),
            self.scheme(),
            self.initial(),
            self.n_measurements,
            self.seed,
        )
        .expect("validated in resolve")
    }

    /// The echo as TOML, loadable with `--config`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
