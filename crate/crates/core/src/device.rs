// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Device parameters, effective parametric rates and pulse envelopes.
//!
//! Frequencies are GHz, rates MHz. Rates enter the dynamics as
//! `MHz * 1e6` per second.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::collections::BTreeMap;
use thiserror::Error;

pub const MHZ: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("hybridization {pair} = {value} outside the dispersive regime (0, 0.5)")]
    Dispersive { pair: String, value: f64 },
    #[error("degenerate modes: zero detuning")]
    Degenerate,
    #[error("no coupling path: λᵢλⱼ = 0")]
    NoCouplingPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub name: String,
    pub omega_ghz: f64,
    pub gamma_mhz: f64,
}

/// Mode indices in the three-resonator system.
pub const READOUT: usize = 0;
pub const SNAIL: usize = 1;
pub const OUTPUT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    pub modes: Vec<Mode>,
    #[serde(alias = "chi")]
    pub chi_mhz: f64,
    pub g3_mhz: f64,
    pub hybridizations: BTreeMap<String, f64>,
    pub n_crit: f64,
    pub g_crit_mhz: f64,
    pub t1_us: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        let mode = |name: &str, omega_ghz, gamma_mhz| Mode {
            name: name.into(),
            omega_ghz,
            gamma_mhz,
        };
        Self {
            modes: vec![
                mode("readout", 6.0, 0.1),
                mode("snail", 4.0, 1.0),
                mode("output", 7.5, 20.0),
            ],
            chi_mhz: 3.0,
            g3_mhz: 30.0,
            hybridizations: BTreeMap::from([
                ("readout-snail".to_string(), 0.1),
                ("output-snail".to_string(), 0.1),
            ]),
            n_crit: 100.0,
            g_crit_mhz: 50.0,
            t1_us: 50.0,
        }
    }
}

fn invalid(field: &str, reason: &str) -> DeviceError {
    DeviceError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.modes.len() != 3 {
            return Err(invalid("device.modes", "exactly three modes (readout, snail, output)"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if !(m.gamma_mhz > 0.0) {
                return Err(invalid(&format!("device.modes[{i}].gamma_mhz"), "must be > 0"));
            }
            if !(m.omega_ghz > 0.0) {
                return Err(invalid(&format!("device.modes[{i}].omega_ghz"), "must be > 0"));
            }
            for n in &self.modes[..i] {
                if n.omega_ghz == m.omega_ghz {
                    return Err(invalid("device.modes", "mode frequencies must be distinct"));
                }
            }
        }
        if !(self.chi_mhz > 0.0) {
            return Err(invalid("device.chi", "must be > 0"));
        }
        for (pair, &value) in &self.hybridizations {
            if !(value > 0.0 && value < 0.5) {
                return Err(DeviceError::Dispersive {
                    pair: pair.clone(),
                    value,
                });
            }
        }
        for (name, v) in [
            ("device.n_crit", self.n_crit),
            ("device.g_crit_mhz", self.g_crit_mhz),
            ("device.t1_us", self.t1_us),
            ("device.g3_mhz", self.g3_mhz),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "must be > 0"));
            }
        }
        Ok(())
    }

    /// Energy decay rate of mode `k` in s⁻¹.
    pub fn gamma(&self, k: usize) -> f64 {
        self.modes[k].gamma_mhz * MHZ
    }

    pub fn chi(&self) -> f64 {
        self.chi_mhz * MHZ
    }

    pub fn t1(&self) -> f64 {
        self.t1_us * 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffectiveRates {
    pub squeeze_readout: f64,
    pub convert_readout_snail: f64,
    pub amplify_snail: f64,
    pub convert_snail_output: f64,
}

impl Default for EffectiveRates {
    fn default() -> Self {
        Self {
            squeeze_readout: 6.0,
            convert_readout_snail: 10.0,
            amplify_snail: 4.0,
            convert_snail_output: 10.0,
        }
    }
}

impl EffectiveRates {
    pub fn validate(&self) -> Result<(), DeviceError> {
        for (name, v) in self.named() {
            if !(v >= 0.0) {
                return Err(invalid(&format!("rates.{name}"), "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("squeeze_readout", self.squeeze_readout),
            ("convert_readout_snail", self.convert_readout_snail),
            ("amplify_snail", self.amplify_snail),
            ("convert_snail_output", self.convert_snail_output),
        ]
    }
}

pub fn hybridization(g: f64, delta: f64) -> Result<f64, DeviceError> {
    if delta == 0.0 {
        return Err(DeviceError::Degenerate);
    }
    Ok(g / delta.abs())
}

pub fn effective_coupling(multiplicity: u32, lam_i: f64, lam_j: f64, g3: f64, pump_amp: f64) -> f64 {
    multiplicity as f64 * lam_i * lam_j * g3 * pump_amp.abs()
}

/// Pump amplitude ε (MHz) that produces `g_target` through a detuned pump.
pub fn required_drive(
    g_target: f64,
    g3: f64,
    delta_sp: f64,
    lam_i: f64,
    lam_j: f64,
) -> Result<f64, DeviceError> {
    let l = lam_i * lam_j;
    if l == 0.0 {
        return Err(DeviceError::NoCouplingPath);
    }
    Ok(g_target / g3 * delta_sp.abs() / l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseKind {
    SqueezeReadout,
    DisplaceReadout,
    ConvertReadoutSnail,
    AmplifySnail,
    ConvertSnailOutput,
    Idle,
}

impl PulseKind {
    pub fn label(self) -> &'static str {
        match self {
            PulseKind::SqueezeReadout => "squeeze_readout",
            PulseKind::DisplaceReadout => "displace_readout",
            PulseKind::ConvertReadoutSnail => "convert_readout_snail",
            PulseKind::AmplifySnail => "amplify_snail",
            PulseKind::ConvertSnailOutput => "convert_snail_output",
            PulseKind::Idle => "idle",
        }
    }
}

/// One parametric pulse. `amplitude` is in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub kind: PulseKind,
    pub amplitude: f64,
    pub phase: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub rise_rate: f64,
    pub fall_rate: f64,
}

impl PulseSegment {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.t_end > self.t_start) {
            return Err(invalid("segment", "t_end must exceed t_start"));
        }
        if !(self.rise_rate > 0.0 && self.fall_rate > 0.0) {
            return Err(invalid("segment", "rise/fall rates must be > 0"));
        }
        if !(self.amplitude >= 0.0) {
            return Err(invalid("segment", "amplitude must be >= 0"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Real envelope factor in [0, 1].
    pub fn shape(&self, t: f64) -> f64 {
        0.25 * erfc(-self.rise_rate * (t - self.t_start)) * erfc(self.fall_rate * (t - self.t_end))
    }
}

/// Complex envelope (re, im) = a·e^{-iφ}·shape(t), in MHz.
pub fn pulse_envelope(seg: &PulseSegment, t: f64) -> (f64, f64) {
    let m = seg.amplitude * seg.shape(t);
    (m * seg.phase.cos(), -m * seg.phase.sin())
}
