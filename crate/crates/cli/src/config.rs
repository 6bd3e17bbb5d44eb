// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration.

use readout_core::device::{DeviceError, DeviceParams, EffectiveRates};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

fn invalid(field: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolChoice {
    #[default]
    Ea,
    Cdr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    /// Integration step in ns; derived from the fastest rate when absent.
    pub dt: Option<f64>,
    /// Samples of the trajectory used for the two-time integrals.
    pub grid_points: usize,
    /// Rows per branch written to trajectory.csv (upper bound).
    pub trajectory_rows: usize,
    /// Evaluation times in report.csv.
    pub report_points: usize,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            dt: None,
            grid_points: 400,
            trajectory_rows: 2000,
            report_points: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Homodyne {
    /// Collection efficiency of the continuous readout.
    pub eta: f64,
    /// Collection efficiency of the released burst.
    pub eta_ea: f64,
    pub n_add: f64,
    /// Linewidth of the continuously measured resonator, MHz.
    pub gamma_meas: f64,
}

impl Default for Homodyne {
    fn default() -> Self {
        Self {
            eta: 0.75,
            eta_ea: 1.0,
            n_add: 0.0,
            gamma_meas: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub n_tot: f64,
    pub total_time_us: f64,
    /// Overrides `device.t1_us` when set.
    pub t1_us: Option<f64>,
    pub t_dead_us: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            n_tot: 5.0,
            total_time_us: 1.0,
            t1_us: None,
            t_dead_us: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaSettings {
    pub squeeze_db: f64,
    pub gain: f64,
    /// Envelope rise rate, 1/s.
    pub rise_rate: f64,
}

impl Default for EaSettings {
    fn default() -> Self {
        Self {
            squeeze_db: 4.0,
            gain: 10.0,
            rise_rate: 2e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub directory: PathBuf,
    pub format: OutputFormat,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub protocol: ProtocolChoice,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default)]
    pub rates: EffectiveRates,
    #[serde(default)]
    pub ea: EaSettings,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub homodyne: Homodyne,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub output: Output,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            protocol: ProtocolChoice::Ea,
            device: DeviceParams::default(),
            rates: EffectiveRates::default(),
            ea: EaSettings::default(),
            simulation: Simulation::default(),
            homodyne: Homodyne::default(),
            budgets: Budgets::default(),
            output: Output::default(),
        }
    }
}

impl RunConfig {
    pub fn t1(&self) -> f64 {
        self.budgets.t1_us.unwrap_or(self.device.t1_us) * 1e-6
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                &format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.device.validate()?;
        self.rates.validate()?;
        let positive = [
            ("ea.gain", self.ea.gain),
            ("ea.rise_rate", self.ea.rise_rate),
            ("homodyne.gamma_meas", self.homodyne.gamma_meas),
            ("budgets.n_tot", self.budgets.n_tot),
            ("budgets.total_time_us", self.budgets.total_time_us),
        ];
        for (f, v) in positive {
            if !(v > 0.0) {
                return Err(invalid(f, "must be > 0"));
            }
        }
        if !(self.ea.gain >= 1.0) {
            return Err(invalid("ea.gain", "must be >= 1"));
        }
        if !(self.ea.squeeze_db >= 0.0) {
            return Err(invalid("ea.squeeze_db", "must be >= 0"));
        }
        for (f, v) in [("homodyne.eta", self.homodyne.eta), ("homodyne.eta_ea", self.homodyne.eta_ea)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(f, "must lie in (0, 1]"));
            }
        }
        if !(self.homodyne.n_add >= 0.0) {
            return Err(invalid("homodyne.n_add", "must be >= 0"));
        }
        if !(self.budgets.t_dead_us >= 0.0) {
            return Err(invalid("budgets.t_dead_us", "must be >= 0"));
        }
        if let Some(t1) = self.budgets.t1_us {
            if !(t1 > 0.0) {
                return Err(invalid("budgets.t1_us", "must be > 0"));
            }
        }
        if let Some(dt) = self.simulation.dt {
            if !(dt > 0.0) {
                return Err(invalid("simulation.dt", "must be > 0"));
            }
        }
        if self.simulation.grid_points < 2 || self.simulation.report_points < 1 || self.simulation.trajectory_rows < 2 {
            return Err(invalid("simulation", "grid_points >= 2, report_points >= 1, trajectory_rows >= 2"));
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
