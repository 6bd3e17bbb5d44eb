// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! `readout sweep`: fidelity contours for both protocols.

use crate::axis::Axis;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{write_table, Table, Value};
use readout_core::device::MHZ;
use readout_core::optimizer::{sweep_fidelity, CdrModel, EaModel, Protocol, SweepGrid, SweepModels};

pub fn models(cfg: &RunConfig) -> SweepModels {
    let h = &cfg.homodyne;
    SweepModels {
        ea: EaModel::from_device(&cfg.device, &cfg.rates, cfg.ea.gain, h.eta_ea, h.n_add, cfg.budgets.t_dead_us * 1e-6),
        cdr: CdrModel {
            points: cfg.simulation.grid_points,
            ..CdrModel::new(h.gamma_meas * MHZ, cfg.device.chi(), h.eta, h.n_add)
        },
        squeeze_db: cfg.ea.squeeze_db,
        t1: cfg.t1(),
    }
}

fn cell_values(c: Option<readout_core::optimizer::Cell>) -> [Value; 3] {
    match c {
        Some(c) => [c.d2.into(), c.fidelity.into(), c.nines.into()],
        None => [f64::NAN.into(), f64::NAN.into(), f64::NAN.into()],
    }
}

pub fn cmd_sweep(cfg: &RunConfig, ntot: &Axis, time: &Axis, jobs: usize) -> Result<(), CliError> {
    let grid = SweepGrid::new(ntot.values(), time.values().iter().map(|t| t * 1e-6).collect())?;
    let m = models(cfg);
    let ea = sweep_fidelity(&grid, Protocol::Ea, &m, jobs)?;
    let cdr = sweep_fidelity(&grid, Protocol::Cdr, &m, jobs)?;

    let mut contours = Table::new(["protocol", "n_tot", "T_us", "d2", "fidelity", "nines"]);
    for (p, g) in [(Protocol::Ea, &ea), (Protocol::Cdr, &cdr)] {
        for (n, t, c) in g.iter() {
            let mut row: Vec<Value> = vec![p.label().into(), n.into(), (t * 1e6).into()];
            row.extend(cell_values(c));
            contours.push(row);
        }
    }
    let mut breakeven = Table::new(["n_tot", "T_us", "fidelity_ea", "fidelity_cdr", "nines_ea", "nines_cdr"]);
    let mut count = 0;
    for ((n, t, e), (_, _, c)) in ea.iter().zip(cdr.iter()) {
        if let (Some(e), Some(c)) = (e, c) {
            if c.fidelity >= e.fidelity {
                count += 1;
                breakeven.push(vec![
                    n.into(),
                    (t * 1e6).into(),
                    e.fidelity.into(),
                    c.fidelity.into(),
                    e.nines.into(),
                    c.nines.into(),
                ]);
            }
        }
    }
    let dir = &cfg.output.directory;
    write_table(dir, "contours", &contours, cfg.output.format)?;
    write_table(dir, "breakeven", &breakeven, cfg.output.format)?;
    let three = |g: &SweepGrid| g.iter().filter(|(_, _, c)| c.is_some_and(|c| c.nines >= 3.0)).count();
    println!(
        "{} cells; 3-nines cells: ea {}, cdr {}; cdr-preferred cells: {count}",
        ea.cells.len(),
        three(&ea),
        three(&cdr)
    );
    Ok(())
}
