// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Linear-regime simulator and calibration engine for pulsed readout of a
//! dispersively coupled qubit through an embedded parametric amplifier.

pub mod device;
pub mod freqplan;
pub mod gaussian;
pub mod metrics;
pub mod optimizer;
pub mod protocols;
