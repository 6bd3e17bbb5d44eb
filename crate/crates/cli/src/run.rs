// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! `readout run`: one protocol, full time trace.

use crate::config::{ProtocolChoice, RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{write_json, write_table, Table, Value};
use readout_core::device::{MHZ, OUTPUT, READOUT};
use readout_core::metrics::{self, HomodyneModel, KernelParams};
use readout_core::optimizer::CdrModel;
use readout_core::protocols::{self, EaOptions};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::LN_10;

const MODES: [&str; 3] = ["readout", "snail", "output"];
const BRANCHES: [&str; 2] = ["e", "g"];

#[derive(Debug, Serialize)]
pub struct Margins {
    /// n_crit minus the peak readout occupation.
    pub n_readout: f64,
    /// g_crit minus each configured rate, MHz.
    pub rates_mhz: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub protocol: ProtocolChoice,
    pub d2_final: f64,
    pub fidelity: f64,
    pub nines: f64,
    pub total_time: f64,
    pub dead_time: f64,
    pub max_n_readout: f64,
    pub dt: f64,
    pub margins: Margins,
    pub calibration: serde_json::Value,
}

/// Per-time output of either protocol before serialization.
struct Trace {
    times: Vec<f64>,
    /// Per branch and time: means (6) and covariance blocks (qq, pp, qp) per mode.
    rows: Vec<[Row; 2]>,
    report_t: Vec<f64>,
    report_d2: Vec<f64>,
    dead_time: f64,
    dt: f64,
    calibration: serde_json::Value,
}

#[derive(Clone, Copy)]
struct Row {
    n: [f64; 3],
    mu: [f64; 6],
    v: [[f64; 3]; 3],
}

fn report_times(total: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|i| total * i as f64 / k as f64).collect()
}

fn ea_trace(cfg: &RunConfig) -> Result<Trace, CliError> {
    let dev = &cfg.device;
    let chi = dev.chi();
    let r = cfg.ea.squeeze_db * LN_10 / 20.0;
    let n_coh = cfg.budgets.n_tot - r.sinh().powi(2);
    if !(n_coh > 0.0) {
        return Err(CliError::Constraint(format!(
            "squeezing {} dB leaves no coherent photons within budget {}",
            cfg.ea.squeeze_db, cfg.budgets.n_tot
        )));
    }
    let mut opts = EaOptions {
        gain: cfg.ea.gain,
        rise_rate: cfg.ea.rise_rate,
        gap: 3.0 / cfg.ea.rise_rate,
        ..EaOptions::new(cfg.ea.squeeze_db, protocols::eta_for_photons(n_coh, chi))
    };
    let (mut schedule, mut cal) = protocols::build_ea_sequence_with(dev, &cfg.rates, &opts)?;
    let t_budget = cfg.budgets.total_time_us * 1e-6;
    if t_budget > schedule.total_duration {
        opts.release_window += t_budget - schedule.total_duration;
        (schedule, cal) = protocols::build_ea_sequence_with(dev, &cfg.rates, &opts)?;
    }
    let dt = match cfg.simulation.dt {
        Some(ns) => ns * 1e-9,
        None => protocols::default_dt(&schedule, dev),
    };
    let traj = protocols::simulate_protocol(&schedule, dev, dt)?;
    let report_t = report_times(schedule.total_duration, cfg.simulation.report_points);
    let report_d2 = protocols::output_snr(
        &traj,
        cfg.homodyne.eta_ea,
        dev.gamma(OUTPUT),
        cfg.homodyne.n_add,
        cfg.simulation.grid_points,
        &report_t,
    )?;
    let rows = (0..traj.len())
        .map(|k| {
            [0, 1].map(|b| {
                let s = &traj.states[b][k];
                let mut row = Row {
                    n: [traj.photon_readout[k][b], traj.photon_snail[k][b], traj.photon_output[k][b]],
                    mu: [0.0; 6],
                    v: [[0.0; 3]; 3],
                };
                for m in 0..3 {
                    let (q, p) = (2 * m, 2 * m + 1);
                    row.mu[q] = s.means[q];
                    row.mu[p] = s.means[p];
                    row.v[m] = [s.cov[(q, q)], s.cov[(p, p)], s.cov[(q, p)]];
                }
                row
            })
        })
        .collect();
    Ok(Trace {
        times: traj.times.clone(),
        rows,
        report_t,
        report_d2,
        dead_time: schedule.dead_time,
        dt,
        calibration: serde_json::json!({ "ea": cal, "schedule": schedule }),
    })
}

fn cdr_trace(cfg: &RunConfig) -> Result<Trace, CliError> {
    let kappa = cfg.homodyne.gamma_meas * MHZ;
    let chi = cfg.device.chi();
    let total = cfg.budgets.total_time_us * 1e-6;
    let model = CdrModel {
        points: cfg.simulation.grid_points,
        ..CdrModel::new(kappa, chi, cfg.homodyne.eta, cfg.homodyne.n_add)
    };
    let nbar = model.nbar(total, cfg.budgets.n_tot);
    let (times, contrast) = model.contrast(total, cfg.budgets.n_tot);
    let report_t = report_times(total, cfg.simulation.report_points);
    let report_d2 = if contrast.iter().all(|&c| c == 0.0) {
        vec![0.0; report_t.len()]
    } else {
        let hm = HomodyneModel::matched(model.eta, kappa, model.n_add, times.clone(), contrast)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let kp = KernelParams::vacuum(kappa, chi);
        let kernel = |a: f64, b: f64| metrics::noise_kernel(&kp, a, b);
        report_t
            .iter()
            .map(|&t| metrics::integrated_snr(&hm, &kernel, t))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Internal(e.to_string()))?
    };
    let rows = times
        .iter()
        .map(|&t| {
            protocols::cdr_means(nbar, kappa, chi, t, f64::INFINITY).map(|(re, im)| {
                let mut mu = [0.0; 6];
                mu[0] = 2f64.sqrt() * re;
                mu[1] = 2f64.sqrt() * im;
                Row {
                    n: [re * re + im * im, 0.0, 0.0],
                    mu,
                    v: [[0.5, 0.5, 0.0]; 3],
                }
            })
        })
        .collect();
    let dt = times.get(1).copied().unwrap_or(0.0);
    Ok(Trace {
        times,
        rows,
        report_t,
        report_d2,
        dead_time: 0.0,
        dt,
        calibration: serde_json::json!({ "nbar": nbar, "kappa": kappa, "chi": chi }),
    })
}

fn trajectory_table(tr: &Trace, max_rows: usize) -> Table {
    let mut cols: Vec<String> = ["t_s", "branch", "n_readout", "n_snail", "n_output"].map(String::from).to_vec();
    for m in MODES {
        cols.push(format!("mu_q_{m}"));
        cols.push(format!("mu_p_{m}"));
    }
    for m in MODES {
        for c in ["qq", "pp", "qp"] {
            cols.push(format!("V_{c}_{m}"));
        }
    }
    let mut table = Table::new(cols);
    let n = tr.times.len();
    let stride = n.div_ceil(max_rows).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    for b in 0..2 {
        for &k in &idx {
            let row = &tr.rows[k][b];
            let mut vals: Vec<Value> = vec![tr.times[k].into(), BRANCHES[b].into()];
            vals.extend(row.n.iter().map(|&x| Value::from(x)));
            vals.extend(row.mu.iter().map(|&x| Value::from(x)));
            vals.extend(row.v.iter().flatten().map(|&x| Value::from(x)));
            table.push(vals);
        }
    }
    table
}

pub fn cmd_run(cfg: &RunConfig) -> Result<(), CliError> {
    let tr = match cfg.protocol {
        ProtocolChoice::Ea => ea_trace(cfg)?,
        ProtocolChoice::Cdr => cdr_trace(cfg)?,
    };
    let t1 = cfg.t1();
    let mut report = Table::new(["t_s", "d2_t", "snr_integrated_t", "fidelity"]);
    for (&t, &d2) in tr.report_t.iter().zip(&tr.report_d2) {
        let f = metrics::assignment_fidelity(d2, t, t1);
        report.push(vec![t.into(), d2.into(), d2.max(0.0).sqrt().into(), f.into()]);
    }
    let total = *tr.report_t.last().unwrap_or(&0.0);
    let d2_final = *tr.report_d2.last().unwrap_or(&0.0);
    let fidelity = metrics::assignment_fidelity(d2_final, total, t1);
    let max_n_readout = tr.rows.iter().flat_map(|r| r.iter().map(|x| x.n[READOUT])).fold(0.0, f64::max);
    let dev = &cfg.device;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        protocol: cfg.protocol,
        d2_final,
        fidelity,
        nines: metrics::nines(fidelity),
        total_time: total,
        dead_time: tr.dead_time,
        max_n_readout,
        dt: tr.dt,
        margins: Margins {
            n_readout: dev.n_crit - max_n_readout,
            rates_mhz: cfg
                .rates
                .named()
                .iter()
                .map(|(k, v)| (k.to_string(), dev.g_crit_mhz - v))
                .collect(),
        },
        calibration: tr.calibration.clone(),
    };
    let dir = &cfg.output.directory;
    write_table(dir, "trajectory", &trajectory_table(&tr, cfg.simulation.trajectory_rows), cfg.output.format)?;
    write_table(dir, "report", &report, cfg.output.format)?;
    write_json(dir, "summary.json", &summary)?;
    println!(
        "{}: d2 = {:.4e}, fidelity = {:.6}, nines = {:.3}, T = {:.4e} s",
        match cfg.protocol {
            ProtocolChoice::Ea => "ea",
            ProtocolChoice::Cdr => "cdr",
        },
        d2_final,
        fidelity,
        summary.nines,
        total
    );
    Ok(())
}
