// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Frequency planning: pairwise mixing products, collision checks and a
//! lattice search for collision-free sets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

const EPS_GHZ: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FreqError {
    #[error("need at least {0} frequencies")]
    TooFew(usize),
    #[error("duplicate frequency {0} GHz")]
    Duplicate(f64),
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("no plan found: {reason}")]
    Infeasible {
        reason: String,
        partial: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyPlan {
    pub freqs: Vec<f64>,
    /// Minimum separation between any two bands, MHz.
    pub guard: f64,
    pub band: (f64, f64),
}

impl FrequencyPlan {
    pub fn new(mut freqs: Vec<f64>, guard: f64, band: (f64, f64)) -> Result<Self, FreqError> {
        freqs.sort_by(f64::total_cmp);
        if !(guard > 0.0) || !(band.1 > band.0) {
            return Err(FreqError::Invalid("guard must be > 0 and band non-empty".into()));
        }
        for w in freqs.windows(2) {
            if w[1] - w[0] < EPS_GHZ {
                return Err(FreqError::Duplicate(w[0]));
            }
            if w[1] - w[0] < guard * 1e-3 - EPS_GHZ {
                return Err(FreqError::Invalid(format!("{} and {} GHz closer than the guard", w[0], w[1])));
            }
        }
        if freqs.iter().any(|&f| f < band.0 - EPS_GHZ || f > band.1 + EPS_GHZ) {
            return Err(FreqError::Invalid("frequency outside band".into()));
        }
        Ok(Self { freqs, guard, band })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MixKind {
    Sum,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixProduct {
    pub kind: MixKind,
    pub i: usize,
    pub j: usize,
    pub freq: f64,
}

impl MixProduct {
    pub fn label(&self) -> String {
        let op = if self.kind == MixKind::Sum { '+' } else { '-' };
        format!("w{}{}w{}", self.i, op, self.j)
    }
}

/// All N(N−1) pairwise sums and absolute differences, with their origin.
pub fn mixing_products(freqs: &[f64]) -> Vec<MixProduct> {
    let n = freqs.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for kind in [MixKind::Sum, MixKind::Difference] {
        for i in 0..n {
            for j in i + 1..n {
                let freq = match kind {
                    MixKind::Sum => freqs[i] + freqs[j],
                    MixKind::Difference => (freqs[i] - freqs[j]).abs(),
                };
                out.push(MixProduct { kind, i, j, freq });
            }
        }
    }
    out
}

/// Distinct mixing frequencies, sums first.
pub fn mixing_set(freqs: &[f64]) -> Result<Vec<f64>, FreqError> {
    if freqs.len() < 2 {
        return Err(FreqError::TooFew(2));
    }
    for (k, a) in freqs.iter().enumerate() {
        if freqs[..k].iter().any(|b| (a - b).abs() < EPS_GHZ) {
            return Err(FreqError::Duplicate(*a));
        }
    }
    let mut out: Vec<f64> = Vec::new();
    for p in mixing_products(freqs) {
        if !out.iter().any(|m| (m - p.freq).abs() < EPS_GHZ) {
            out.push(p.freq);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CollisionKind {
    ModeHit,
    DegenerateMix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collision {
    pub kind: CollisionKind,
    pub tones: Vec<String>,
    pub frequencies: Vec<f64>,
    /// MHz.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CollisionReport {
    pub collisions: Vec<Collision>,
}

impl CollisionReport {
    pub fn is_empty(&self) -> bool {
        self.collisions.is_empty()
    }
}

fn collides(a: f64, b: f64, guard_ghz: f64) -> bool {
    (a - b).abs() < guard_ghz - EPS_GHZ
}

pub fn validate(plan: &FrequencyPlan) -> CollisionReport {
    let g = plan.guard * 1e-3;
    let prods = mixing_products(&plan.freqs);
    let mut collisions = Vec::new();
    for p in &prods {
        for (k, &w) in plan.freqs.iter().enumerate() {
            if collides(p.freq, w, g) {
                collisions.push(Collision {
                    kind: CollisionKind::ModeHit,
                    tones: vec![p.label(), format!("w{k}")],
                    frequencies: vec![p.freq, w],
                    gap: (p.freq - w).abs() * 1e3,
                });
            }
        }
    }
    for (a, p) in prods.iter().enumerate() {
        for q in &prods[a + 1..] {
            if collides(p.freq, q.freq, g) {
                collisions.push(Collision {
                    kind: CollisionKind::DegenerateMix,
                    tones: vec![p.label(), q.label()],
                    frequencies: vec![p.freq, q.freq],
                    gap: (p.freq - q.freq).abs() * 1e3,
                });
            }
        }
    }
    CollisionReport { collisions }
}

/// N²·guard, in GHz for a guard in MHz.
pub fn bandwidth_bound(n: usize, guard: f64) -> f64 {
    (n * n) as f64 * guard * 1e-3
}

const NODE_LIMIT: usize = 2_000_000;

/// Seeded depth-first search over a guard-spaced lattice in `band`.
pub fn search_plan(n: usize, band: (f64, f64), guard: f64, seed: u64) -> Result<FrequencyPlan, FreqError> {
    if n < 1 {
        return Err(FreqError::TooFew(1));
    }
    if !(guard > 0.0) || !(band.1 > band.0) {
        return Err(FreqError::Invalid("guard must be > 0 and band non-empty".into()));
    }
    let bound = bandwidth_bound(n, guard);
    if band.1 - band.0 < bound {
        return Err(FreqError::Infeasible {
            reason: format!(
                "band width {:.3} GHz is below the bound N^2*guard = {:.3} GHz",
                band.1 - band.0,
                bound
            ),
            partial: vec![],
        });
    }
    let step = guard * 1e-3;
    let count = ((band.1 - band.0) / step + 1e-9).floor() as usize + 1;
    let mut lattice: Vec<f64> = (0..count).map(|k| band.0 + k as f64 * step).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lattice.shuffle(&mut rng);

    let ok = |set: &[f64]| {
        FrequencyPlan::new(set.to_vec(), guard, band)
            .map(|p| validate(&p).is_empty())
            .unwrap_or(false)
    };
    let mut chosen: Vec<usize> = Vec::new();
    let mut best: Vec<f64> = Vec::new();
    let mut nodes = 0usize;
    // Cursor per depth into the shuffled lattice.
    let mut cursor = vec![0usize; n + 1];
    loop {
        let depth = chosen.len();
        if depth == n {
            let freqs = chosen.iter().map(|&k| lattice[k]).collect();
            return FrequencyPlan::new(freqs, guard, band);
        }
        let start = cursor[depth];
        let mut advanced = false;
        for k in start..lattice.len() {
            nodes += 1;
            if chosen.contains(&k) {
                continue;
            }
            let mut trial: Vec<f64> = chosen.iter().map(|&c| lattice[c]).collect();
            trial.push(lattice[k]);
            if ok(&trial) {
                cursor[depth] = k + 1;
                chosen.push(k);
                cursor[depth + 1] = k + 1;
                if trial.len() > best.len() {
                    best = trial;
                }
                advanced = true;
                break;
            }
            if nodes > NODE_LIMIT {
                break;
            }
        }
        if !advanced {
            if depth == 0 || nodes > NODE_LIMIT {
                best.sort_by(f64::total_cmp);
                return Err(FreqError::Infeasible {
                    reason: format!("lattice exhausted after {nodes} candidates"),
                    partial: best,
                });
            }
            chosen.pop();
        }
    }
}
