// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! `readout optimize`: penalized Nelder–Mead over the EA parameters.

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{write_json, write_table, Table, Value};
use readout_core::optimizer::{
    ea_evaluator, ea_parameters, objective, optimize, penalty_prefactor, EaModel, EvalOutcome, ObjectiveConfig,
    OptimizerError, Parameter,
};
use serde::Serialize;

pub fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [a, b] if a >= 0.0 && b >= 0.0 && a + b > 0.0 => Ok((a, b)),
        [_, _] => Err("weights must be >= 0 and not both zero".into()),
        _ => Err(format!("expected `lambda1,lambda2`, got `{s}`")),
    }
}

#[derive(Debug, Serialize)]
struct Point {
    objective: f64,
    prefactor: f64,
    #[serde(flatten)]
    outcome: EvalOutcome,
}

#[derive(Debug, Serialize)]
struct ThetaStar {
    schema_version: u32,
    seed: u64,
    weights: (f64, f64),
    evaluations: usize,
    parameters: Vec<Parameter>,
    best: Point,
    baseline: Point,
}

pub fn cmd_optimize(cfg: &RunConfig, budget: usize, weights: (f64, f64)) -> Result<(), CliError> {
    let h = &cfg.homodyne;
    let model = EaModel::from_device(&cfg.device, &cfg.rates, cfg.ea.gain, h.eta_ea, h.n_add, cfg.budgets.t_dead_us * 1e-6);
    let theta0 = ea_parameters(&model, cfg.budgets.n_tot, cfg.ea.squeeze_db);
    let eval = ea_evaluator(model, cfg.rates);
    let ocfg = ObjectiveConfig {
        lambda1: weights.0,
        lambda2: weights.1,
        ..ObjectiveConfig::from_device(&cfg.device)
    };
    let res = optimize(&theta0, &ocfg, &eval, budget, cfg.seed)?;
    let point = |th| -> Result<Point, OptimizerError> {
        let outcome = eval(th)?;
        Ok(Point {
            objective: objective(th, &ocfg, &eval)?,
            prefactor: penalty_prefactor(&outcome, &ocfg),
            outcome,
        })
    };
    let star = ThetaStar {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        weights,
        evaluations: res.history.len(),
        parameters: res.theta.params.clone(),
        best: point(&res.theta)?,
        baseline: point(&theta0)?,
    };
    let mut cols = vec!["eval".to_string(), "objective".into(), "best".into()];
    cols.extend(theta0.params.iter().map(|p| p.name.clone()));
    let mut hist = Table::new(cols);
    for r in &res.history {
        let mut row: Vec<Value> = vec![r.eval.into(), r.objective.into(), r.best.into()];
        row.extend(r.values.iter().map(|&v| Value::from(v)));
        hist.push(row);
    }
    let dir = &cfg.output.directory;
    write_json(dir, "theta_star.json", &star)?;
    write_table(dir, "history", &hist, cfg.output.format)?;
    println!(
        "{} evaluations: objective {:.4e} (baseline {:.4e}), d2 {:.4e}",
        star.evaluations, star.best.objective, star.baseline.objective, star.best.outcome.d2
    );
    Ok(())
}
