// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Sweep axis specs: `lo:hi:steps` with an optional `:log` or `:lin` suffix.

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub log: bool,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        (0..self.steps)
            .map(|k| {
                let u = k as f64 / (self.steps - 1) as f64;
                if self.log {
                    (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + u * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

pub fn parse(s: &str) -> Result<Axis, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(format!("expected lo:hi:steps[:log|:lin], got `{s}`"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number"));
    let (lo, hi) = (num(parts[0])?, num(parts[1])?);
    let steps: usize = parts[2].trim().parse().map_err(|_| format!("`{}` is not a step count", parts[2]))?;
    let log = match parts.get(3).map(|p| p.trim()) {
        None | Some("lin") => false,
        Some("log") => true,
        Some(o) => return Err(format!("unknown scale `{o}`")),
    };
    if steps == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo || (steps > 1 && hi == lo) {
        return Err(format!("need finite lo < hi and steps >= 1 in `{s}`"));
    }
    if lo <= 0.0 {
        return Err(format!("axis values must be > 0 in `{s}`"));
    }
    Ok(Axis { lo, hi, steps, log })
}
