// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

use crate::config::ConfigError;
use readout_core::freqplan::FreqError;
use readout_core::optimizer::OptimizerError;
use readout_core::protocols::ProtocolError;
use std::path::PathBuf;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONSTRAINT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Constraint(_) => EXIT_CONSTRAINT,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Config(_) | CliError::Io(..) | CliError::Internal(_) => EXIT_ERROR,
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::SubThreshold { .. } | ProtocolError::Constraint { .. } | ProtocolError::Unreachable(_) => {
                CliError::Constraint(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            OptimizerError::Config(_) | OptimizerError::Axis(_) => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<FreqError> for CliError {
    fn from(e: FreqError) -> Self {
        match e {
            FreqError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
