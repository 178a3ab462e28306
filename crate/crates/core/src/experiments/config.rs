use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{CalibrationOptions, FitResult};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::propagator::EvolveOptions;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "QUTRITCR_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub device: DeviceParams,
    pub seed: u64,
    pub shots: u64,
    pub output: PathBuf,
    /// Includes the CR drive amplitudes that set the Bell gate time.
    pub calibration: CalibrationOptions,
    pub rabi: RabiConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            seed: 7,
            shots: 100_000,
            output: PathBuf::from("out"),
            calibration: CalibrationOptions::default(),
            rabi: RabiConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    pub t_max_ns: f64,
    pub points: usize,
    pub risefall_ns: f64,
    pub phase_rad: f64,
    pub evolve: EvolveOptions,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            t_max_ns: 1600.0,
            points: 64,
            risefall_ns: 20.0,
            phase_rad: 0.0,
            evolve: EvolveOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.calibration.evolve.validate()?;
        self.rabi.evolve.validate()?;
        if self.shots == 0 {
            return Err(Error::InvalidParams("shots must be at least 1".into()));
        }
        Ok(())
    }

    /// Accepts a full experiment config or a bare device description.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = match serde_json::from_str::<Self>(text) {
            Ok(c) => c,
            Err(full) => match serde_json::from_str::<DeviceParams>(text) {
                Ok(device) => Self { device, ..Self::default() },
                Err(_) => return Err(full.into()),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Replace the seed with `value` when it is set.
    pub fn with_seed_override(mut self, value: Option<&str>) -> Result<Self> {
        if let Some(v) = value {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParams(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
        }
        Ok(self)
    }

    /// Apply [`SEED_ENV`] if present.
    pub fn with_env_seed(self) -> Result<Self> {
        let v = std::env::var(SEED_ENV).ok();
        self.with_seed_override(v.as_deref())
    }

    /// SHA-256 of the serialized config, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

/// A tolerance test on one reported value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
            pass: value >= lo && value <= hi,
        }
    }
}

/// Rabi fit of one control branch. `fit` is absent when no oscillation
/// was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFit {
    pub control_state: usize,
    pub fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Signed plateau rate in rad/ns, relative to control `|0⟩`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_rad_per_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub pipeline: String,
    pub config_hash: String,
    pub seed: u64,
    /// Longest schedule played, ns.
    pub duration_ns: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<MetricReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<ControlFit>,
    pub checks: Vec<Check>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
