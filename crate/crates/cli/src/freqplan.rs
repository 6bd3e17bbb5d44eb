// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! `readout freqplan`: search or check a collision-free set of mode frequencies.

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::write_json;
use readout_core::freqplan::{
    bandwidth_bound, mixing_products, search_plan, validate, Collision, FreqError, FrequencyPlan, MixKind,
};
use serde::Serialize;

pub const DEFAULT_BAND: (f64, f64) = (4.0, 8.0);

pub fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number"));
    let (lo, hi) = (num(a)?, num(b)?);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("need 0 < lo < hi in `{s}`"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Serialize)]
struct Product {
    label: String,
    kind: MixKind,
    freq_ghz: f64,
}

#[derive(Debug, Serialize)]
struct PlanFile {
    schema_version: u32,
    status: &'static str,
    seed: u64,
    guard_mhz: f64,
    band_ghz: (f64, f64),
    bandwidth_bound_ghz: f64,
    freqs_ghz: Vec<f64>,
    mixing_products: Vec<Product>,
    collisions: Vec<Collision>,
    /// Closest approach between any two tones (modes and products) less the guard, MHz.
    min_margin_mhz: Option<f64>,
    reason: Option<String>,
}

fn min_margin(freqs: &[f64], guard: f64) -> Option<f64> {
    let mut tones: Vec<f64> = freqs.to_vec();
    tones.extend(mixing_products(freqs).iter().map(|p| p.freq));
    tones.sort_by(f64::total_cmp);
    tones.windows(2).map(|w| (w[1] - w[0]) * 1e3 - guard).reduce(f64::min)
}

pub fn cmd_freqplan(
    cfg: &RunConfig,
    n: usize,
    band: Option<(f64, f64)>,
    guard: f64,
    check: Option<Vec<f64>>,
) -> Result<(), CliError> {
    if !(guard > 0.0) {
        return Err(CliError::Usage("--guard must be > 0".into()));
    }
    let result = match &check {
        Some(list) => {
            let lo = list.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = list.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            FrequencyPlan::new(list.clone(), guard, band.unwrap_or((lo, hi.max(lo + 1e-3))))
        }
        None => search_plan(n, band.unwrap_or(DEFAULT_BAND), guard, cfg.seed),
    };
    let band = band.unwrap_or(DEFAULT_BAND);
    let n_used = check.as_ref().map_or(n, Vec::len);
    let mut file = PlanFile {
        schema_version: SCHEMA_VERSION,
        status: "ok",
        seed: cfg.seed,
        guard_mhz: guard,
        band_ghz: band,
        bandwidth_bound_ghz: bandwidth_bound(n_used, guard),
        freqs_ghz: Vec::new(),
        mixing_products: Vec::new(),
        collisions: Vec::new(),
        min_margin_mhz: None,
        reason: None,
    };
    let outcome = match result {
        Ok(plan) => {
            let report = validate(&plan);
            file.band_ghz = plan.band;
            file.mixing_products = mixing_products(&plan.freqs)
                .iter()
                .map(|p| Product {
                    label: p.label(),
                    kind: p.kind,
                    freq_ghz: p.freq,
                })
                .collect();
            file.min_margin_mhz = min_margin(&plan.freqs, guard);
            file.freqs_ghz = plan.freqs;
            if report.is_empty() {
                Ok(())
            } else {
                file.status = "collisions";
                file.collisions = report.collisions;
                Err(CliError::Infeasible(format!("{} collisions", file.collisions.len())))
            }
        }
        Err(FreqError::Infeasible { reason, partial }) => {
            file.status = "infeasible";
            file.freqs_ghz = partial;
            file.reason = Some(reason.clone());
            Err(CliError::Infeasible(reason))
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&cfg.output.directory, "plan.json", &file)?;
    if outcome.is_ok() {
        let f: Vec<String> = file.freqs_ghz.iter().map(|f| format!("{f}")).collect();
        println!("plan [{}] GHz, min margin {:.1} MHz", f.join(", "), file.min_margin_mhz.unwrap_or(f64::NAN));
    }
    outcome
}
