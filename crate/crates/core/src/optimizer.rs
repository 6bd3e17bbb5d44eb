// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Penalized objective, bounded simplex search, and the resource sweeps.

use crate::device::{DeviceParams, EffectiveRates, MHZ, OUTPUT, READOUT};
use crate::metrics::{self, HomodyneModel, KernelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, LN_10, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluation failed at {point}: {reason}")]
    Evaluator { point: String, reason: String },
    #[error("photon budget {0} leaves no room for a displacement")]
    Infeasible(f64),
    #[error("sweep axis `{0}` must be strictly increasing and non-empty")]
    Axis(&'static str),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_crit: f64,
    /// Ceiling per interaction name, MHz.
    pub g_crit: BTreeMap<String, f64>,
    pub gain_target: f64,
}

impl ObjectiveConfig {
    pub fn from_device(device: &DeviceParams) -> Self {
        let g_crit = EffectiveRates::default()
            .named()
            .iter()
            .map(|(n, _)| (n.to_string(), device.g_crit_mhz))
            .collect();
        Self {
            lambda1: 1.0,
            lambda2: 0.0,
            n_crit: device.n_crit,
            g_crit,
            gain_target: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) || self.lambda1 + self.lambda2 == 0.0 {
            return Err(OptimizerError::Config("weights must be >= 0 and not both zero".into()));
        }
        if !(self.n_crit > 0.0) || self.g_crit.values().any(|&g| !(g > 0.0)) {
            return Err(OptimizerError::Config("ceilings must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ParameterVector {
    pub params: Vec<Parameter>,
}

impl ParameterVector {
    pub fn with(mut self, name: &str, value: f64, lower: f64, upper: f64) -> Self {
        self.params.push(Parameter {
            name: name.into(),
            value,
            lower,
            upper,
        });
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        for p in &self.params {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(OptimizerError::Config(format!("bounds of `{}`", p.name)));
            }
            if !(p.value >= p.lower && p.value <= p.upper) {
                return Err(OptimizerError::Config(format!("`{}` outside its bounds", p.name)));
            }
        }
        Ok(())
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| (p.value - p.lower) / (p.upper - p.lower))
            .collect()
    }

    pub fn from_normalized(&self, x: &[f64]) -> Self {
        let params = self
            .params
            .iter()
            .zip(x)
            .map(|(p, &u)| Parameter {
                value: p.lower + u.clamp(0.0, 1.0) * (p.upper - p.lower),
                ..p.clone()
            })
            .collect();
        Self { params }
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.params.iter().map(|p| format!("{}={:e}", p.name, p.value)).collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Quantities an evaluator reports for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutcome {
    pub d2: f64,
    pub gain: f64,
    pub max_n_readout: f64,
    /// Peak rate per interaction name, MHz.
    pub rates_mhz: BTreeMap<String, f64>,
}

pub fn penalty_prefactor(out: &EvalOutcome, cfg: &ObjectiveConfig) -> f64 {
    let mut p = 1.0 - out.max_n_readout / cfg.n_crit;
    for (name, g) in &out.rates_mhz {
        if let Some(c) = cfg.g_crit.get(name) {
            p -= g / c;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn objective<E: std::fmt::Display>(
    theta: &ParameterVector,
    cfg: &ObjectiveConfig,
    evaluator: &dyn Fn(&ParameterVector) -> Result<EvalOutcome, E>,
) -> Result<f64, OptimizerError> {
    let out = evaluator(theta).map_err(|e| OptimizerError::Evaluator {
        point: theta.describe(),
        reason: e.to_string(),
    })?;
    Ok(penalty_prefactor(&out, cfg) * (cfg.lambda1 * out.d2 + cfg.lambda2 * out.gain))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub eval: usize,
    pub objective: f64,
    pub best: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub theta: ParameterVector,
    pub value: f64,
    pub history: Vec<HistoryRow>,
}

/// Bounded Nelder–Mead maximization in normalized coordinates.
pub fn optimize<E: std::fmt::Display>(
    theta0: &ParameterVector,
    cfg: &ObjectiveConfig,
    evaluator: &dyn Fn(&ParameterVector) -> Result<EvalOutcome, E>,
    budget: usize,
    seed: u64,
) -> Result<OptimizeResult, OptimizerError> {
    cfg.validate()?;
    theta0.validate()?;
    let n = theta0.dim();
    if budget < n + 1 {
        return Err(OptimizerError::Config(format!("budget {budget} < dim + 1 = {}", n + 1)));
    }
    let mut history: Vec<HistoryRow> = Vec::new();
    let mut best = (f64::NEG_INFINITY, theta0.normalized());
    let eval = |x: &[f64], history: &mut Vec<HistoryRow>, best: &mut (f64, Vec<f64>)| -> Result<f64, OptimizerError> {
        let th = theta0.from_normalized(x);
        let f = objective(&th, cfg, evaluator)?;
        let f = if f.is_nan() { f64::NEG_INFINITY } else { f };
        if f > best.0 {
            *best = (f, x.to_vec());
        }
        history.push(HistoryRow {
            eval: history.len() + 1,
            objective: f,
            best: best.0,
            values: th.params.iter().map(|p| p.value).collect(),
        });
        Ok(f)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = theta0.normalized();
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((eval(&x0, &mut history, &mut best)?, x0.clone()));
    for i in 0..n {
        let mut x = x0.clone();
        let step = 0.1 * (1.0 + 0.1 * rng.gen::<f64>());
        x[i] = if x[i] + step <= 1.0 { x[i] + step } else { x[i] - step };
        simplex.push((eval(&x, &mut history, &mut best)?, x));
    }
    let clip = |v: Vec<f64>| v.into_iter().map(|u| u.clamp(0.0, 1.0)).collect::<Vec<_>>();
    let lerp = |a: &[f64], b: &[f64], t: f64| clip(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect());

    while history.len() < budget {
        simplex.sort_by(|a, b| b.0.total_cmp(&a.0));
        let diam = simplex[1..]
            .iter()
            .map(|(_, x)| x.iter().zip(&simplex[0].1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diam < 1e-6 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(_, x)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let xr = lerp(&centroid, &worst.1, -1.0);
        let fr = eval(&xr, &mut history, &mut best)?;
        if fr > simplex[0].0 {
            if history.len() >= budget {
                simplex[n] = (fr, xr);
                break;
            }
            let xe = lerp(&centroid, &worst.1, -2.0);
            let fe = eval(&xe, &mut history, &mut best)?;
            simplex[n] = if fe > fr { (fe, xe) } else { (fr, xr) };
        } else if fr > simplex[n - 1].0 {
            simplex[n] = (fr, xr);
        } else {
            if history.len() >= budget {
                break;
            }
            let (xc, fc) = if fr > worst.0 {
                let xc = lerp(&centroid, &xr, 0.5);
                let fc = eval(&xc, &mut history, &mut best)?;
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &worst.1, 0.5);
                let fc = eval(&xc, &mut history, &mut best)?;
                (xc, fc)
            };
            if fc > worst.0.max(fr) {
                simplex[n] = (fc, xc);
            } else {
                let x_best = simplex[0].1.clone();
                for v in simplex.iter_mut().skip(1) {
                    if history.len() >= budget {
                        break;
                    }
                    let x = lerp(&x_best, &v.1, 0.5);
                    *v = (eval(&x, &mut history, &mut best)?, x);
                }
            }
        }
    }
    Ok(OptimizeResult {
        theta: theta0.from_normalized(&best.1),
        value: best.0,
        history,
    })
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximum of `f` on [a, b]: uniform scan, then golden refinement around the best cell.
fn scan_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize, iters: usize) -> (f64, f64) {
    if !(b > a) {
        return (a, f(a));
    }
    let h = (b - a) / n as f64;
    let (mut xb, mut fb) = (a, f(a));
    for k in 1..=n {
        let x = a + k as f64 * h;
        let v = f(x);
        if v > fb {
            (xb, fb) = (x, v);
        }
    }
    let (x, v) = golden_max(f, (xb - h).max(a), (xb + h).min(b), iters);
    if v > fb {
        (x, v)
    } else {
        (xb, fb)
    }
}

/// Closed-form catch-process-release SNR model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EaModel {
    pub chi: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Readout-SNAIL conversion rate, s⁻¹.
    pub g_as: f64,
    pub gain: f64,
    pub eta: f64,
    pub n_add: f64,
    pub t_dead: f64,
}

impl EaModel {
    pub fn from_device(device: &DeviceParams, rates: &EffectiveRates, gain: f64, eta: f64, n_add: f64, t_dead: f64) -> Self {
        Self {
            chi: device.chi(),
            gamma_a: device.gamma(READOUT),
            gamma_b: device.gamma(OUTPUT),
            g_as: rates.convert_readout_snail * MHZ,
            gain,
            eta,
            n_add,
            t_dead,
        }
    }

    pub fn transfer(&self) -> f64 {
        self.g_as * self.g_as / (self.g_as * self.g_as + self.chi * self.chi)
    }

    /// Squared separation and variance on the measured output quadrature
    /// after phase accumulation `t_a`, conversion and amplification.
    pub fn processed(&self, n_coh: f64, squeeze_db: f64, t_a: f64) -> (f64, f64) {
        let r = squeeze_db * LN_10 / 20.0;
        let (vs, va) = (0.5 * (-2.0 * r).exp(), 0.5 * (2.0 * r).exp());
        let psi = self.chi * t_a;
        let (s2, c2) = (psi.sin().powi(2), psi.cos().powi(2));
        let decay = (-self.gamma_a * t_a).exp();
        let v = (vs * c2 + va * s2).min(vs * s2 + va * c2) * decay + 0.5 * (1.0 - decay);
        let dq2 = 8.0 * n_coh.max(0.0) * decay * s2;
        let (ps, g2) = (self.transfer(), self.gain * self.gain);
        (dq2 * ps * g2, g2 * (ps * v + 0.5 * (1.0 - ps)))
    }

    /// Matched-filter SNR of a released burst over window `l`.
    pub fn release_snr(&self, n_coh: f64, squeeze_db: f64, t_a: f64, l: f64) -> f64 {
        if !(l > 0.0) {
            return 0.0;
        }
        let (dq2, v) = self.processed(n_coh, squeeze_db, t_a);
        let x = self.gamma_b * l;
        let e = -(-x).exp_m1();
        let vac = 1.0 - x * (-x).exp() / e;
        2.0 * self.eta * dq2 * e / (0.5 + self.n_add + 2.0 * self.eta * ((v - 0.5) * e + vac))
    }

    /// Coherent photons left after squeezing takes its share of `n_tot`.
    pub fn coherent_photons(n_tot: f64, squeeze_db: f64) -> f64 {
        n_tot - (squeeze_db * LN_10 / 20.0).sinh().powi(2)
    }

    /// Best SNR within total time `total_t`, over interaction time and release window.
    pub fn snr(&self, total_t: f64, n_tot: f64, squeeze_db: f64) -> f64 {
        let tau = total_t - self.t_dead;
        let n_coh = Self::coherent_photons(n_tot, squeeze_db);
        if !(tau > 0.0) || !(n_coh > 0.0) {
            return 0.0;
        }
        let best_l = |t_a: f64| {
            let room = tau - t_a;
            if !(room > 0.0) {
                return 0.0;
            }
            scan_max(&|l| self.release_snr(n_coh, squeeze_db, t_a, l), 0.0, room, 16, 40).1
        };
        let ta_max = tau.min(FRAC_PI_2 / self.chi);
        scan_max(&best_l, 0.0, ta_max, 64, 50).1
    }

    /// SNR once the window exceeds interaction time and release.
    pub fn saturated_snr(&self, n_tot: f64, squeeze_db: f64) -> f64 {
        self.snr(self.saturation_time(), n_tot, squeeze_db)
    }

    pub fn saturation_time(&self) -> f64 {
        self.t_dead + FRAC_PI_2 / self.chi + 10.0 / self.gamma_b
    }
}

/// Continuous dispersive readout under a peak-photon budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdrModel {
    pub kappa: f64,
    pub chi: f64,
    pub eta: f64,
    pub n_add: f64,
    pub points: usize,
}

impl CdrModel {
    pub fn new(kappa: f64, chi: f64, eta: f64, n_add: f64) -> Self {
        Self {
            kappa,
            chi,
            eta,
            n_add,
            points: 400,
        }
    }

    /// Drive strength n̄ whose peak occupation on [0, T] equals `n_tot`.
    pub fn nbar(&self, total_t: f64, n_tot: f64) -> f64 {
        let peak = (0..=self.points)
            .map(|k| {
                let t = total_t * k as f64 / self.points as f64;
                let e = (-0.5 * self.kappa * t).exp();
                1.0 - 2.0 * e * (self.chi * t).cos() + e * e
            })
            .fold(0.0, f64::max);
        if peak > 0.0 {
            n_tot / peak
        } else {
            0.0
        }
    }

    pub fn contrast(&self, total_t: f64, n_tot: f64) -> (Vec<f64>, Vec<f64>) {
        let nbar = self.nbar(total_t, n_tot);
        let amp = (2.0 * self.eta * self.kappa).sqrt() * 2f64.sqrt();
        let times: Vec<f64> = (0..self.points).map(|k| total_t * k as f64 / (self.points - 1) as f64).collect();
        let contrast = times
            .iter()
            .map(|&t| {
                let [e, g] = crate::protocols::cdr_means(nbar, self.kappa, self.chi, t, f64::INFINITY);
                amp * (e.1 - g.1)
            })
            .collect();
        (times, contrast)
    }

    pub fn snr(&self, total_t: f64, n_tot: f64) -> Result<f64, OptimizerError> {
        if !(total_t > 0.0) || !(n_tot > 0.0) {
            return Ok(0.0);
        }
        let (times, contrast) = self.contrast(total_t, n_tot);
        if contrast.iter().all(|&c| c == 0.0) {
            return Ok(0.0);
        }
        let model = HomodyneModel::matched(self.eta, self.kappa, self.n_add, times, contrast)?;
        let kp = KernelParams::vacuum(self.kappa, self.chi);
        let kernel = |t1: f64, t2: f64| metrics::noise_kernel(&kp, t1, t2);
        Ok(metrics::integrated_snr(&model, &kernel, total_t)?)
    }
}

/// Squeezing level maximizing `snr(db)` under a photon budget.
pub fn optimal_squeezing(
    photon_budget: f64,
    snr: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<(f64, f64), OptimizerError> {
    if !(photon_budget > 0.0) {
        return Err(OptimizerError::Infeasible(photon_budget));
    }
    let db_max = max_squeeze_db(photon_budget);
    Ok(scan_max(&|db| snr(db), 0.0, db_max, 40, 60))
}

/// Squeezing that would consume the whole budget.
pub fn max_squeeze_db(photon_budget: f64) -> f64 {
    20.0 / LN_10 * photon_budget.sqrt().asinh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Protocol {
    Ea,
    Cdr,
}

impl Protocol {
    pub fn label(self) -> &'static str {
        match self {
            Protocol::Ea => "ea",
            Protocol::Cdr => "cdr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub d2: f64,
    pub fidelity: f64,
    pub nines: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub n_tot: Vec<f64>,
    pub total_time: Vec<f64>,
    /// Row-major over (n_tot, total_time); `None` marks a failed cell.
    pub cells: Vec<Option<Cell>>,
}

impl SweepGrid {
    pub fn new(n_tot: Vec<f64>, total_time: Vec<f64>) -> Result<Self, OptimizerError> {
        let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&n_tot) {
            return Err(OptimizerError::Axis("n_tot"));
        }
        if !increasing(&total_time) {
            return Err(OptimizerError::Axis("total_time"));
        }
        let cells = vec![None; n_tot.len() * total_time.len()];
        Ok(Self {
            n_tot,
            total_time,
            cells,
        })
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<Cell> {
        self.cells[i * self.total_time.len() + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, Option<Cell>)> + '_ {
        self.n_tot
            .iter()
            .flat_map(move |&n| self.total_time.iter().map(move |&t| (n, t)))
            .zip(&self.cells)
            .map(|((n, t), c)| (n, t, *c))
    }
}

/// Per-cell evaluators for the two protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepModels {
    pub ea: EaModel,
    pub cdr: CdrModel,
    pub squeeze_db: f64,
    pub t1: f64,
}

impl SweepModels {
    /// EA squeezing is capped so it uses at most half the photon budget.
    pub fn ea_squeeze(&self, n_tot: f64) -> f64 {
        self.squeeze_db.min(max_squeeze_db(0.5 * n_tot))
    }

    pub fn d2(&self, protocol: Protocol, n_tot: f64, total_t: f64) -> Result<f64, OptimizerError> {
        match protocol {
            Protocol::Ea => Ok(self.ea.snr(total_t, n_tot, self.ea_squeeze(n_tot))),
            Protocol::Cdr => self.cdr.snr(total_t, n_tot),
        }
    }
}

pub fn sweep_fidelity(
    grid: &SweepGrid,
    protocol: Protocol,
    models: &SweepModels,
    jobs: usize,
) -> Result<SweepGrid, OptimizerError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| OptimizerError::Config(e.to_string()))?;
    let points: Vec<(f64, f64)> = grid
        .n_tot
        .iter()
        .flat_map(|&n| grid.total_time.iter().map(move |&t| (n, t)))
        .collect();
    let cells = pool.install(|| {
        points
            .par_iter()
            .map(|&(n, t)| {
                let d2 = models.d2(protocol, n, t).ok().filter(|d| d.is_finite())?;
                let fidelity = metrics::assignment_fidelity(d2, t, models.t1);
                Some(Cell {
                    d2,
                    fidelity,
                    nines: metrics::nines(fidelity),
                })
            })
            .collect()
    });
    Ok(SweepGrid {
        cells,
        ..grid.clone()
    })
}

/// Parameter vector of the closed-form EA evaluator.
pub fn ea_parameters(model: &EaModel, n_tot: f64, squeeze_db: f64) -> ParameterVector {
    let n_coh = EaModel::coherent_photons(n_tot, squeeze_db).max(0.1);
    ParameterVector::default()
        .with("squeeze_db", squeeze_db, 0.0, 12.0)
        .with("n_coh", n_coh, 0.0, n_tot.max(n_coh) * 4.0)
        .with("t_a", FRAC_PI_2 / model.chi, 0.0, PI / model.chi)
        .with("release", 5.0 / model.gamma_b, 0.0, 20.0 / model.gamma_b)
        .with("gain", model.gain, 1.0, model.gain.max(1.0) * 10.0)
}

/// Evaluator over [`ea_parameters`] using the closed-form model.
pub fn ea_evaluator(
    model: EaModel,
    rates: EffectiveRates,
) -> impl Fn(&ParameterVector) -> Result<EvalOutcome, OptimizerError> {
    move |theta: &ParameterVector| {
        let get = |n: &str| theta.get(n).ok_or_else(|| OptimizerError::Config(format!("missing `{n}`")));
        let (db, n_coh, t_a, l, gain) = (get("squeeze_db")?, get("n_coh")?, get("t_a")?, get("release")?, get("gain")?);
        let m = EaModel { gain, ..model };
        let d2 = m.release_snr(n_coh, db, t_a, l);
        let n_a = n_coh + (db * LN_10 / 20.0).sinh().powi(2);
        let rates_mhz = rates.named().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Ok(EvalOutcome {
            d2,
            gain: gain * m.transfer().sqrt(),
            max_n_readout: n_a,
            rates_mhz,
        })
    }
}
