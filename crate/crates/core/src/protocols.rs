// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Calibration and simulation of the catch-process-release sequence and the
//! closed-form trajectories used to compare it with continuous readout.
//!
//! Branch index 0 is the excited qubit state (+χ), index 1 the ground state
//! (−χ). Rates passed to the calibration functions are in s⁻¹.

use crate::device::{
    DeviceError, DeviceParams, EffectiveRates, PulseKind, PulseSegment, MHZ, OUTPUT, READOUT,
    SNAIL,
};
use crate::gaussian::{
    mode_cov, photon_number, squeeze_state_analytic, step_fundamental, step_varying, Dynamics,
    GaussianError, GaussianState, GeneratorSpec,
};
use crate::metrics::{self, DiscriminationInput, HomodyneModel};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

pub const BRANCH_SIGN: [f64; 2] = [1.0, -1.0];

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("squeezing rate r = {r:e} does not exceed |χ| = {chi:e}")]
    SubThreshold { r: f64, chi: f64 },
    #[error("{quantity} = {value:.4} exceeds ceiling {ceiling:.4}")]
    Constraint {
        quantity: String,
        value: f64,
        ceiling: f64,
    },
    #[error("{0} dB of squeezing is not reachable at the given rates")]
    Unreachable(f64),
    #[error("dt = {dt:e} s does not resolve rate {rate:e} s⁻¹")]
    Resolution { dt: f64, rate: f64 },
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezeCalibration {
    pub phi_chi: f64,
    pub delay: f64,
    pub n_a: f64,
}

/// Detuned squeezing angle, alignment delay and readout photon number.
pub fn calibrate_squeeze(r: f64, chi: f64, t: f64) -> Result<SqueezeCalibration, ProtocolError> {
    let chi = chi.abs();
    if !(r > chi) || chi == 0.0 {
        return Err(ProtocolError::SubThreshold { r, chi });
    }
    let rc = (r * r - chi * chi).sqrt();
    let (ch, sh) = ((rc * t).cosh(), (rc * t).sinh());
    let num = rc * ch + (r * r * ch * ch - chi * chi).sqrt();
    let phi_chi = num.atan2(chi * sh);
    let delay = (PI - 2.0 * phi_chi) / (2.0 * chi);
    let n_a = 0.5 * ((r / rc).powi(2) * (2.0 * rc * t).cosh() - (chi / rc).powi(2) - 1.0);
    Ok(SqueezeCalibration {
        phi_chi,
        delay,
        n_a,
    })
}

/// Branch separation |Δμ| (quadrature units) after driving for `t`.
pub fn displacement_separation(eta: f64, chi: f64, gamma_a: f64, t: f64) -> f64 {
    let den = gamma_a * gamma_a + 4.0 * chi * chi;
    let e = (-0.5 * gamma_a * t).exp();
    (4.0 * eta / den * (e * (gamma_a * (chi * t).sin() + 2.0 * chi * (chi * t).cos()) - 2.0 * chi)).abs()
}

/// Separation at the optimal window t = π/χ.
pub fn optimal_separation(eta: f64, chi: f64, gamma_a: f64) -> f64 {
    8.0 * chi * eta / (gamma_a * gamma_a + 4.0 * chi * chi) * ((-PI * gamma_a / (2.0 * chi)).exp() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConversionTransfer {
    pub p_a: f64,
    pub p_s: f64,
    pub theta_chi: f64,
    /// Resonant swap time π/g.
    pub t_pi: f64,
    /// Time of peak transfer under detuning, π/|Ω|.
    pub t_peak: f64,
}

pub fn conversion_transfer(g: f64, chi: f64) -> ConversionTransfer {
    let om = (g * g + chi * chi).sqrt();
    ConversionTransfer {
        p_a: chi * chi / (om * om),
        p_s: g * g / (om * om),
        theta_chi: (chi / om).atan(),
        t_pi: PI / g,
        t_peak: PI / om,
    }
}

// Angle of the minor axis of a 2x2 covariance, in [0, π).
fn squeezed_axis(v: &DMatrix<f64>) -> f64 {
    let major = 0.5 * (2.0 * v[(0, 1)]).atan2(v[(0, 0)] - v[(1, 1)]);
    (major + FRAC_PI_2).rem_euclid(PI)
}

fn min_eig2(v: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(v.clone()).eigenvalues.min()
}

/// Time for the squeezed variance to reach `db` below vacuum.
pub fn squeeze_duration(r: f64, chi: f64, gamma: f64, db: f64) -> Result<f64, ProtocolError> {
    if db <= 0.0 {
        return Ok(0.0);
    }
    let target = 0.5 * 10f64.powf(-db / 10.0);
    let vac = GaussianState::vacuum(1);
    let var = |t: f64| min_eig2(&squeeze_state_analytic(r, 0.0, chi, gamma, &vac, t).cov);
    let mut hi = 1e-9;
    while var(hi) > target {
        hi *= 2.0;
        if hi > 1e-3 {
            return Err(ProtocolError::Unreachable(db));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if var(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-18 {
            break;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EaCalibration {
    pub squeeze_angle_chi: f64,
    pub squeeze_duration: f64,
    pub squeeze_phase: f64,
    pub n_a: f64,
    pub delay: f64,
    pub displace_duration: f64,
    pub conversion_pi_time: f64,
    pub conversion_phase: f64,
    pub amp_phase: f64,
    pub amp_duration: f64,
    pub transfer_prob: f64,
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSchedule {
    pub segments: Vec<PulseSegment>,
    pub total_duration: f64,
    pub dead_time: f64,
}

impl PulseSchedule {
    pub fn empty(duration: f64) -> Self {
        Self {
            segments: vec![],
            total_duration: duration,
            dead_time: duration,
        }
    }

    pub fn max_rise_rate(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.rise_rate.max(s.fall_rate))
            .fold(0.0, f64::max)
    }

    pub fn segment(&self, kind: PulseKind) -> Option<&PulseSegment> {
        self.segments.iter().find(|s| s.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EaOptions {
    pub squeeze_db: f64,
    /// Displacement drive rate, s⁻¹.
    pub eta: f64,
    pub gain: f64,
    pub rise_rate: f64,
    /// Free time inserted between consecutive gates.
    pub gap: f64,
    /// Idle time after the output conversion.
    pub release_window: f64,
    /// Displacement phase θ_d.
    pub theta_d: f64,
}

impl EaOptions {
    pub fn new(squeeze_db: f64, eta: f64) -> Self {
        let rise_rate = 2e8;
        Self {
            squeeze_db,
            eta,
            gain: 10.0,
            rise_rate,
            gap: 3.0 / rise_rate,
            release_window: 2.5e-7,
            theta_d: 0.0,
        }
    }
}

/// Drive rate η giving `n` peak displacement photons over the π/χ window.
pub fn eta_for_photons(n: f64, chi: f64) -> f64 {
    chi * (0.5 * n.max(0.0)).sqrt()
}

pub fn build_ea_sequence(
    device: &DeviceParams,
    rates: &EffectiveRates,
    squeeze_db: f64,
    eta: f64,
) -> Result<(PulseSchedule, EaCalibration), ProtocolError> {
    build_ea_sequence_with(device, rates, &EaOptions::new(squeeze_db, eta))
}

pub fn build_ea_sequence_with(
    device: &DeviceParams,
    rates: &EffectiveRates,
    opts: &EaOptions,
) -> Result<(PulseSchedule, EaCalibration), ProtocolError> {
    device.validate()?;
    rates.validate()?;
    for (name, v) in rates.named() {
        if v > device.g_crit_mhz {
            return Err(ProtocolError::Constraint {
                quantity: format!("rates.{name}"),
                value: v,
                ceiling: device.g_crit_mhz,
            });
        }
    }
    let chi = device.chi();
    let gamma_a = device.gamma(READOUT);
    let r = rates.squeeze_readout * MHZ;
    let g_as = rates.convert_readout_snail * MHZ;
    let r_s = rates.amplify_snail * MHZ;
    let g_sb = rates.convert_snail_output * MHZ;
    let (nu, gap) = (opts.rise_rate, opts.gap);

    let (t_sq, sq) = if opts.squeeze_db > 0.0 {
        if !(r > chi) {
            return Err(ProtocolError::SubThreshold { r, chi });
        }
        let t = squeeze_duration(r, chi, gamma_a, opts.squeeze_db)?;
        (t, calibrate_squeeze(r, chi, t)?)
    } else {
        (
            0.0,
            SqueezeCalibration {
                phi_chi: FRAC_PI_2,
                delay: 0.0,
                n_a: 0.0,
            },
        )
    };
    if sq.n_a > device.n_crit {
        return Err(ProtocolError::Constraint {
            quantity: "n_a".into(),
            value: sq.n_a,
            ceiling: device.n_crit,
        });
    }

    let conv = conversion_transfer(g_as, chi);
    let t_c = conv.t_peak;
    let t_disp = PI / chi;
    // Alignment: after squeezing the branch axes are skewed; free rotation
    // until the conversion plus the branch rotation inside it must cancel it.
    let (skew, a_plus) = if t_sq > 0.0 {
        let vac = GaussianState::vacuum(1);
        let ax = BRANCH_SIGN.map(|s| {
            squeezed_axis(&squeeze_state_analytic(r, 0.0, s * chi, gamma_a, &vac, t_sq).cov)
        });
        (ax[0] - ax[1], ax[0])
    } else {
        (0.0, 0.0)
    };
    let period = PI / (2.0 * chi);
    let base = t_disp + 3.0 * gap;
    let mut idle = (skew / (2.0 * chi) - 0.5 * t_c - base).rem_euclid(period);
    if idle < 1e-12 {
        idle += period;
    }
    let common = a_plus - chi * (idle + base + 0.5 * t_c);
    let squeeze_phase = (-2.0 * common).rem_euclid(2.0 * PI);
    let amp_phase = 2.0 * opts.theta_d + FRAC_PI_2;
    let conv_phase = -FRAC_PI_2;
    let t_amp = if opts.gain > 1.0 && r_s > 0.0 {
        opts.gain.ln() / r_s
    } else {
        0.0
    };

    let mut segs = Vec::new();
    let mut t = gap;
    let mut push = |kind, amplitude: f64, phase, dur: f64, t: &mut f64| {
        if dur > 0.0 {
            segs.push(PulseSegment {
                kind,
                amplitude,
                phase,
                t_start: *t,
                t_end: *t + dur,
                rise_rate: nu,
                fall_rate: nu,
            });
            *t += dur + gap;
        }
    };
    push(PulseKind::SqueezeReadout, rates.squeeze_readout, squeeze_phase, t_sq, &mut t);
    push(PulseKind::Idle, 0.0, 0.0, idle, &mut t);
    push(PulseKind::DisplaceReadout, opts.eta / MHZ, opts.theta_d, t_disp, &mut t);
    push(PulseKind::ConvertReadoutSnail, rates.convert_readout_snail, conv_phase, t_c, &mut t);
    push(PulseKind::AmplifySnail, rates.amplify_snail, amp_phase, t_amp, &mut t);
    push(PulseKind::ConvertSnailOutput, rates.convert_snail_output, conv_phase, PI / g_sb, &mut t);
    push(PulseKind::Idle, 0.0, 0.0, opts.release_window, &mut t);
    let total = segs.last().map(|s| s.t_end).unwrap_or(0.0);
    let schedule = PulseSchedule {
        segments: segs,
        total_duration: total,
        dead_time: total - t_disp,
    };
    let cal = EaCalibration {
        squeeze_angle_chi: sq.phi_chi,
        squeeze_duration: t_sq,
        squeeze_phase,
        n_a: sq.n_a,
        delay: idle,
        displace_duration: t_disp,
        conversion_pi_time: t_c,
        conversion_phase: conv.theta_chi,
        amp_phase,
        amp_duration: t_amp,
        transfer_prob: conv.p_s,
        separation: optimal_separation(opts.eta, chi, gamma_a),
    };
    Ok((schedule, cal))
}

/// Generator of one qubit branch at time `t`.
pub fn generator_at(schedule: &PulseSchedule, device: &DeviceParams, sign: f64, t: f64) -> GeneratorSpec {
    let mut spec = GeneratorSpec::zero(3)
        .with_decay(READOUT, device.gamma(READOUT))
        .with_decay(SNAIL, device.gamma(SNAIL))
        .with_decay(OUTPUT, device.gamma(OUTPUT))
        .add_detuning(READOUT, sign * device.chi());
    for seg in &schedule.segments {
        if seg.kind == PulseKind::Idle
            || t < seg.t_start - 12.0 / seg.rise_rate
            || t > seg.t_end + 12.0 / seg.fall_rate
        {
            continue;
        }
        let a = seg.amplitude * seg.shape(t) * MHZ;
        spec = match seg.kind {
            PulseKind::SqueezeReadout => spec.add_squeeze(READOUT, a, seg.phase),
            PulseKind::DisplaceReadout => spec.add_drive(READOUT, a, seg.phase),
            PulseKind::ConvertReadoutSnail => spec.add_conversion(READOUT, SNAIL, a, seg.phase),
            PulseKind::AmplifySnail => spec.add_squeeze(SNAIL, a, seg.phase),
            PulseKind::ConvertSnailOutput => spec.add_conversion(SNAIL, OUTPUT, a, seg.phase),
            PulseKind::Idle => spec,
        };
    }
    spec
}

/// dt = min(1/(50·max rate), rise time/20).
pub fn default_dt(schedule: &PulseSchedule, device: &DeviceParams) -> f64 {
    let mut rate = device.chi();
    for k in 0..3 {
        rate = rate.max(device.gamma(k));
    }
    for s in &schedule.segments {
        rate = rate.max(s.amplitude * MHZ);
    }
    let mut dt = 1.0 / (50.0 * rate);
    let nu = schedule.max_rise_rate();
    if nu > 0.0 {
        dt = dt.min(1.0 / (20.0 * nu));
    }
    dt
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States per branch: [excited, ground].
    pub states: [Vec<GaussianState>; 2],
    /// Fundamental matrices Φ(t) per branch.
    pub fundamentals: [Vec<DMatrix<f64>>; 2],
    pub photon_readout: Vec<[f64; 2]>,
    pub photon_snail: Vec<[f64; 2]>,
    pub photon_output: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn states_e(&self) -> &[GaussianState] {
        &self.states[0]
    }

    pub fn states_g(&self) -> &[GaussianState] {
        &self.states[1]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Fisher value of the full internal state at grid index `k`, in the
    /// squared-SNR units of [`metrics::error_probability`].
    pub fn internal_snr(&self, k: usize) -> Result<f64, ProtocolError> {
        let (e, g) = (&self.states[0][k], &self.states[1][k]);
        let input = DiscriminationInput {
            mu_e: e.means.clone(),
            mu_g: g.means.clone(),
            cov_e: e.cov.clone(),
            cov_g: g.cov.clone(),
        };
        Ok(metrics::fisher_to_snr(metrics::fisher_discriminant(&input)?))
    }
}

pub fn simulate_protocol(
    schedule: &PulseSchedule,
    device: &DeviceParams,
    dt: f64,
) -> Result<Trajectory, ProtocolError> {
    simulate_protocol_from(schedule, device, dt, 1, &GaussianState::vacuum(3))
}

/// Integrates both branches from `init`, recording every `stride` steps.
pub fn simulate_protocol_from(
    schedule: &PulseSchedule,
    device: &DeviceParams,
    dt: f64,
    stride: usize,
    init: &GaussianState,
) -> Result<Trajectory, ProtocolError> {
    let mut fastest = device.chi();
    for k in 0..3 {
        fastest = fastest.max(device.gamma(k));
    }
    for s in &schedule.segments {
        fastest = fastest.max(s.amplitude * MHZ);
    }
    if dt * fastest >= 0.02 {
        return Err(ProtocolError::Resolution { dt, rate: fastest });
    }
    let total = schedule.total_duration;
    let n = ((total / dt).ceil() as usize).max(1);
    let h = if total > 0.0 { total / n as f64 } else { 0.0 };
    let stride = stride.max(1);
    let run = |sign: f64| -> Result<(Vec<f64>, Vec<GaussianState>, Vec<DMatrix<f64>>), ProtocolError> {
        let dyn_at = |t: f64| Dynamics::new(&generator_at(schedule, device, sign, t));
        let mut state = init.clone();
        let mut phi = DMatrix::<f64>::identity(6, 6);
        let (mut times, mut states, mut fund) = (vec![0.0], vec![state.clone()], vec![phi.clone()]);
        let mut d0 = dyn_at(0.0)?;
        for k in 0..n {
            let t = k as f64 * h;
            let dm = dyn_at(t + 0.5 * h)?;
            let d1 = dyn_at(t + h)?;
            state = step_varying(&state, &d0, &dm, &d1, h)?;
            phi = step_fundamental(&phi, &d0, &dm, &d1, h);
            state.time = (k + 1) as f64 * h;
            if (k + 1) % stride == 0 || k + 1 == n {
                times.push(state.time);
                states.push(state.clone());
                fund.push(phi.clone());
            }
            d0 = d1;
        }
        Ok((times, states, fund))
    };
    let (e, g) = rayon::join(|| run(BRANCH_SIGN[0]), || run(BRANCH_SIGN[1]));
    let (times, se, fe) = e?;
    let (_, sg, fg) = g?;
    let photons = |mode: usize| -> Vec<[f64; 2]> {
        se.iter()
            .zip(&sg)
            .map(|(a, b)| [photon_number(a, mode), photon_number(b, mode)])
            .collect()
    };
    Ok(Trajectory {
        photon_readout: photons(READOUT),
        photon_snail: photons(SNAIL),
        photon_output: photons(OUTPUT),
        times,
        states: [se, sg],
        fundamentals: [fe, fg],
    })
}

/// Matched-filter homodyne SNR of the output field, evaluated at each time in
/// `t_eval`, using `points` samples of the trajectory for the double integral.
pub fn output_snr(
    traj: &Trajectory,
    eta: f64,
    gamma_out: f64,
    n_add: f64,
    points: usize,
    t_eval: &[f64],
) -> Result<Vec<f64>, ProtocolError> {
    let n = traj.len();
    let m = points.clamp(2, n.max(2));
    let idx: Vec<usize> = (0..m)
        .map(|i| ((i as f64) * (n - 1) as f64 / (m - 1) as f64).round() as usize)
        .collect();
    let q = 2 * OUTPUT;
    let times: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let amp = (2.0 * eta * gamma_out).sqrt();
    let contrast: Vec<f64> = idx
        .iter()
        .map(|&k| amp * (traj.states[0][k].means[q] - traj.states[1][k].means[q]))
        .collect();
    // Γ(t1, t2) = [Φ(t1) Φ(t2)⁻¹ V(t2)]_qq, averaged over branches.
    let mut rows = [Vec::new(), Vec::new()];
    let mut cols = [Vec::new(), Vec::new()];
    for b in 0..2 {
        for &k in &idx {
            let phi = &traj.fundamentals[b][k];
            let v = &traj.states[b][k].cov;
            let w = phi
                .clone()
                .lu()
                .solve(&v.column(q).into_owned())
                .ok_or(GaussianError::Dimension("singular fundamental matrix".into()))?;
            rows[b].push(phi.row(q).transpose().into_owned());
            cols[b].push(w);
        }
    }
    let kmat = DMatrix::from_fn(m, m, |i, j| {
        let (a, c) = if i >= j { (i, j) } else { (j, i) };
        0.5 * (rows[0][a].dot(&cols[0][c]) + rows[1][a].dot(&cols[1][c]))
    });
    let pos = |t: f64| {
        let k = times.partition_point(|&x| x < t * (1.0 - 1e-12));
        (k < m && (times[k] - t).abs() <= 1e-15 + 1e-9 * t).then_some(k)
    };
    let kernel = |t1: f64, t2: f64| match (pos(t1), pos(t2)) {
        (Some(i), Some(j)) => kmat[(i, j)],
        _ => f64::NAN,
    };
    let mut out = Vec::with_capacity(t_eval.len());
    for &t in t_eval {
        let k = times.iter().take_while(|&&x| x <= t * (1.0 + 1e-12)).count();
        if k < 2 || contrast[..k].iter().all(|&c| c == 0.0) {
            out.push(0.0);
            continue;
        }
        let model = HomodyneModel::matched(eta, gamma_out, n_add, times[..k].to_vec(), contrast[..k].to_vec())?;
        out.push(metrics::integrated_snr(&model, &kernel, t)?);
    }
    Ok(out)
}

fn cexp(re: f64, im: f64) -> (f64, f64) {
    let e = re.exp();
    (e * im.cos(), e * im.sin())
}

/// Continuous-drive field (X, Y) for both branches; `chi` is the magnitude.
///
/// α(t) = √n̄ e^{−iφ}(1 − e^{−(κ/2 + iχ)t}) while driven, free decay after
/// `pulse_t`. X = Re α, Y = Im α.
pub fn cdr_means(nbar: f64, kappa: f64, chi: f64, t: f64, pulse_t: f64) -> [(f64, f64); 2] {
    BRANCH_SIGN.map(|s| {
        let c = s * chi;
        let phi = (2.0 * c / kappa).atan();
        let field = |t: f64| {
            let (er, ei) = cexp(-0.5 * kappa * t, -c * t);
            let (ar, ai) = (1.0 - er, -ei);
            let (pr, pi) = (phi.cos(), -phi.sin());
            (nbar.sqrt() * (pr * ar - pi * ai), nbar.sqrt() * (pr * ai + pi * ar))
        };
        if t <= pulse_t {
            field(t)
        } else {
            let (x0, y0) = field(pulse_t);
            let (er, ei) = cexp(-0.5 * kappa * (t - pulse_t), -c * (t - pulse_t));
            (x0 * er - y0 * ei, x0 * ei + y0 * er)
        }
    })
}

/// n̄ = κ|β₀|²/((κ/2)² + χ²).
pub fn cdr_nbar(kappa: f64, chi: f64, beta0: f64) -> f64 {
    kappa * beta0 * beta0 / (0.25 * kappa * kappa + chi * chi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EaBurst {
    pub gain: f64,
    pub nbar: f64,
    pub chi: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub t_a: f64,
    pub t_proc: f64,
    /// Rise rate of the release envelope a(Δt).
    pub rise_rate: f64,
}

/// Released-burst quadratures (X, Y) for both branches.
///
/// The readout field after `t_a` of driving, α = √n̄ e^{−iφ}(1 − e^{−(γ_a/2 + iχ)t_a})
/// with φ = atan(2χ/γ_a), is amplified along its branch-dependent quadrature
/// Im α and released with envelope s(t) = a(Δt)e^{−γ_bΔt/2}:
/// X = G s Im α, Y = (s/G) Re α.
pub fn ea_means(p: &EaBurst, t: f64) -> [(f64, f64); 2] {
    let dt = t - p.t_proc;
    let s = 0.5 * erfc(-p.rise_rate * dt) * (-0.5 * p.gamma_b * dt.max(0.0)).exp();
    cdr_means(p.nbar, p.gamma_a, p.chi.abs(), p.t_a, f64::INFINITY)
        .map(|(re, im)| (p.gain * s * im, s / p.gain * re))
}

/// Means on the measured quadrature for a trajectory's mode.
pub fn mode_means(traj: &Trajectory, mode: usize, k: usize) -> [DVector<f64>; 2] {
    [0, 1].map(|b| traj.states[b][k].means.rows(2 * mode, 2).into_owned())
}

/// Reduced covariance of `mode` at grid index `k` for both branches.
pub fn mode_covs(traj: &Trajectory, mode: usize, k: usize) -> [DMatrix<f64>; 2] {
    [0, 1].map(|b| mode_cov(&traj.states[b][k], mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::gaussian::propagator;

    #[test]
    fn squeeze_calibration_limits() {
        let c = calibrate_squeeze(6e6, 3e6, 0.0).unwrap();
        assert!(c.n_a.abs() < 1e-15);
        assert!((c.phi_chi - FRAC_PI_2).abs() < 1e-15);
        assert!(c.delay.abs() < 1e-15);
        assert!(matches!(
            calibrate_squeeze(3e6, 3e6, 1e-7),
            Err(ProtocolError::SubThreshold { .. })
        ));
    }

    #[test]
    fn photon_formula_matches_covariance() {
        let (r, chi) = (6e6, 3e6);
        for t in [2e-8, 7e-8, 1.4e-7] {
            let c = calibrate_squeeze(r, chi, t).unwrap();
            let s = squeeze_state_analytic(r, 0.0, chi, 0.0, &GaussianState::vacuum(1), t);
            assert!((c.n_a - photon_number(&s, 0)).abs() < 1e-10 * c.n_a.max(1.0));
        }
    }

    #[test]
    fn moderate_squeezing_within_photon_ceiling() {
        for db in [4.0, 5.0, 6.0] {
            let t = squeeze_duration(6e6, 3e6, 1e5, db).unwrap();
            let c = calibrate_squeeze(6e6, 3e6, t).unwrap();
            assert!(c.n_a <= 100.0 && c.n_a > 0.0, "{db} dB: {}", c.n_a);
        }
    }

    #[test]
    fn separation_formula() {
        let (eta, chi, g) = (4e6, 3e6, 1e5);
        assert_eq!(displacement_separation(eta, chi, g, 0.0), 0.0);
        let a = displacement_separation(eta, chi, g, PI / chi);
        assert!((a - optimal_separation(eta, chi, g)).abs() < 1e-12 * a);
        let lim = optimal_separation(eta, chi, 0.0);
        assert!((lim - 4.0 * eta / chi).abs() < 1e-12 * lim);
    }

    #[test]
    fn separation_matches_driven_branches() {
        let (eta, chi, g) = (4e6, 3e6, 1e5);
        let t = 0.8 * PI / chi;
        let mu = BRANCH_SIGN.map(|s| {
            let spec = GeneratorSpec::zero(1)
                .add_detuning(0, s * chi)
                .with_decay(0, g)
                .add_drive(0, eta, 0.0);
            let dy = Dynamics::new(&spec).unwrap();
            let mut st = GaussianState::vacuum(1);
            let n = 4000;
            for _ in 0..n {
                st = dy.step(&st, t / n as f64).unwrap();
            }
            st.means
        });
        let d = (&mu[0] - &mu[1]).norm();
        assert!((d - displacement_separation(eta, chi, g, t)).abs() < 1e-9 * d);
    }

    #[test]
    fn transfer_probabilities() {
        let c = conversion_transfer(1e7, 0.0);
        assert_eq!((c.p_s, c.p_a, c.theta_chi), (1.0, 0.0, 0.0));
        assert!((conversion_transfer(3e6, 3e6).p_s - 0.5).abs() < 1e-15);
        assert!((conversion_transfer(1e7, 3e6).p_s - 100.0 / 109.0).abs() < 1e-15);
    }

    #[test]
    fn detuned_conversion_peak_population() {
        let (g, chi) = (1e7, 3e6);
        let spec = GeneratorSpec::zero(2)
            .add_detuning(0, chi)
            .add_conversion(0, 1, g, -FRAC_PI_2);
        let init = GaussianState::vacuum(2).displaced(0, 2.0, 0.0);
        let n0 = photon_number(&init, 0);
        let mut best: f64 = 0.0;
        let t_end = 2.0 * PI / g;
        let n = 2000;
        for k in 1..=n {
            let p = propagator(&spec, t_end * k as f64 / n as f64).unwrap();
            let s = GaussianState {
                means: p.apply_means(&init.means),
                cov: &p.matrix * &init.cov * p.matrix.transpose(),
                time: 0.0,
            };
            best = best.max(photon_number(&s, 1) / n0);
        }
        assert!((best - 100.0 / 109.0).abs() < 1e-5);
    }

    #[test]
    fn schedule_timing() {
        let dev = DeviceParams::default();
        let rates = EffectiveRates::default();
        let (s, cal) = build_ea_sequence(&dev, &rates, 4.0, 5e6).unwrap();
        let disp = s.segment(PulseKind::DisplaceReadout).unwrap();
        assert!((disp.duration() - PI / 3e6).abs() < 1e-15);
        assert!((cal.displace_duration - PI / 3e6).abs() < 1e-15);
        let conv = s.segment(PulseKind::ConvertReadoutSnail).unwrap();
        assert!((conv.duration() - PI / (1e14f64 + 9e12).sqrt()).abs() < 1e-15);
        let out = s.segment(PulseKind::ConvertSnailOutput).unwrap();
        assert!((out.duration() - PI / 1e7).abs() < 1e-15);
        assert!((cal.amp_phase - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(s.total_duration, s.segments.last().unwrap().t_end);
        assert!((s.dead_time - (s.total_duration - PI / 3e6)).abs() < 1e-15);
        for w in s.segments.windows(2) {
            assert!(w[1].t_start >= w[0].t_end);
        }
    }

    #[test]
    fn schedule_rejects_excess() {
        let mut dev = DeviceParams::default();
        dev.n_crit = 0.5;
        let r = build_ea_sequence(&dev, &EffectiveRates::default(), 6.0, 5e6);
        assert!(matches!(r, Err(ProtocolError::Constraint { .. })));
        let dev = DeviceParams::default();
        let rates = EffectiveRates {
            convert_readout_snail: 80.0,
            ..EffectiveRates::default()
        };
        assert!(matches!(
            build_ea_sequence(&dev, &rates, 4.0, 5e6),
            Err(ProtocolError::Constraint { .. })
        ));
    }

    #[test]
    fn empty_schedule_stays_vacuum() {
        let dev = DeviceParams::default();
        let tr = simulate_protocol(&PulseSchedule::empty(2e-7), &dev, 5e-10).unwrap();
        for b in 0..2 {
            let last = tr.states[b].last().unwrap();
            assert!(last.means.abs().max() < 1e-15);
            assert!((&last.cov - DMatrix::<f64>::identity(6, 6) * 0.5).abs().max() < 1e-15);
        }
    }

    #[test]
    fn identity_protocol_stays_vacuum() {
        let dev = DeviceParams::default();
        let opts = EaOptions {
            gain: 1.0,
            ..EaOptions::new(0.0, 0.0)
        };
        let (s, _) = build_ea_sequence_with(&dev, &EffectiveRates::default(), &opts).unwrap();
        let tr = simulate_protocol(&s, &dev, default_dt(&s, &dev)).unwrap();
        for b in 0..2 {
            for st in &tr.states[b] {
                assert!(st.means.abs().max() < 1e-12);
                assert!((&st.cov - DMatrix::<f64>::identity(6, 6) * 0.5).abs().max() < 1e-9);
            }
        }
    }

    #[test]
    fn cdr_limits() {
        let [e, g] = cdr_means(4.0, 6e6, 3e6, 0.0, 1e-6);
        assert_eq!(e, (0.0, 0.0));
        assert_eq!(g, (0.0, 0.0));
        let phi = (2.0f64 * 3e6 / 6e6).atan();
        let [e, g] = cdr_means(4.0, 6e6, 3e6, 1e-5, 1e-4);
        assert!((e.0 - 2.0 * phi.cos()).abs() < 1e-9 && (e.1 + 2.0 * phi.sin()).abs() < 1e-9);
        assert!((g.0 - 2.0 * phi.cos()).abs() < 1e-9 && (g.1 - 2.0 * phi.sin()).abs() < 1e-9);
        assert!((cdr_nbar(6e6, 3e6, 1e6) - 6e6 * 1e12 / (9e12 + 9e12)).abs() < 1e-6);
    }

    #[test]
    fn ea_burst_structure() {
        let p = EaBurst {
            gain: 1.0,
            nbar: 5.0,
            chi: 3e6,
            gamma_a: 1e5,
            gamma_b: 2e7,
            t_a: 0.0,
            t_proc: 1e-7,
            rise_rate: 2e8,
        };
        for t in [0.0, 1.5e-7, 5e-7] {
            for (x, y) in ea_means(&p, t) {
                assert!(x.abs() < 1e-15 && y.abs() < 1e-15);
            }
        }
        let p1 = EaBurst { t_a: 3e-7, gain: 3.0, ..p };
        let p2 = EaBurst { gain: 6.0, ..p1 };
        let (a, b) = (ea_means(&p1, 2e-7), ea_means(&p2, 2e-7));
        for k in 0..2 {
            assert!((b[k].0 - 2.0 * a[k].0).abs() < 1e-12 * a[k].0.abs().max(1e-300));
            assert!((b[k].1 - 0.5 * a[k].1).abs() < 1e-12 * a[k].1.abs().max(1e-300));
        }
    }

    fn lossless() -> DeviceParams {
        let mut d = DeviceParams::default();
        for m in d.modes.iter_mut() {
            m.gamma_mhz = 1e-12;
        }
        d
    }

    fn single(kind: PulseKind, amp: f64, phase: f64, dur: f64) -> PulseSchedule {
        let nu = 2e8;
        let t0 = 3.0 / nu;
        PulseSchedule {
            segments: vec![PulseSegment {
                kind,
                amplitude: amp,
                phase,
                t_start: t0,
                t_end: t0 + dur,
                rise_rate: nu,
                fall_rate: nu,
            }],
            total_duration: dur + 2.0 * t0,
            dead_time: 0.0,
        }
    }

    fn chi_zero(mut d: DeviceParams) -> DeviceParams {
        d.chi_mhz = 1e-12;
        d
    }

    #[test]
    fn resonant_swap_moves_all_photons() {
        let dev = chi_zero(lossless());
        let init = GaussianState::vacuum(3).displaced(READOUT, 2.0, 0.5);
        let n0 = photon_number(&init, READOUT);
        let s = single(PulseKind::ConvertReadoutSnail, 10.0, -FRAC_PI_2, PI / 1e7);
        let tr = simulate_protocol_from(&s, &dev, 2.5e-11, 1, &init).unwrap();
        let last = tr.len() - 1;
        assert!(tr.photon_readout[last][0] < 1e-6 * n0);
        assert!((tr.photon_snail[last][0] - n0).abs() < 1e-6);
    }

    #[test]
    fn double_pi_returns_population() {
        let dev = chi_zero(lossless());
        let init = GaussianState::vacuum(3).displaced(READOUT, 2.0, 0.0);
        let n0 = photon_number(&init, READOUT);
        let s = single(PulseKind::ConvertReadoutSnail, 10.0, -FRAC_PI_2, 2.0 * PI / 1e7);
        let tr = simulate_protocol_from(&s, &dev, 2.5e-11, 1, &init).unwrap();
        let last = tr.len() - 1;
        assert!((tr.photon_readout[last][0] - n0).abs() < 1e-6 * n0);
        let mid = tr.photon_snail.iter().map(|p| p[0]).fold(0.0, f64::max);
        assert!((mid - n0).abs() < 1e-4 * n0);
    }

    #[test]
    fn amplification_is_symplectic() {
        let dev = chi_zero(lossless());
        let rs = 10.0;
        let dur = 1e-7;
        let s = single(PulseKind::AmplifySnail, rs, FRAC_PI_2, dur);
        let tr = simulate_protocol_from(&s, &dev, 2.5e-11, 1, &GaussianState::vacuum(3)).unwrap();
        let v = mode_cov(tr.states[0].last().unwrap(), SNAIL);
        let g = (rs * MHZ * dur).exp();
        assert!((v[(0, 0)] - 0.5 * g * g).abs() < 1e-6 * g * g);
        assert!((v[(1, 1)] - 0.5 / (g * g)).abs() < 1e-6);
        assert!((v.determinant() - 0.25).abs() < 1e-8);
    }

    #[test]
    fn branches_mirror() {
        let dev = DeviceParams::default();
        let nu = 2e8;
        let mut segs = Vec::new();
        let mut t = 3.0 / nu;
        for (kind, amp, dur) in [
            (PulseKind::SqueezeReadout, 6.0, 8e-8),
            (PulseKind::DisplaceReadout, 4.0, PI / 3e6),
            (PulseKind::ConvertReadoutSnail, 10.0, PI / 1.09e14f64.sqrt()),
            (PulseKind::AmplifySnail, 10.0, 1e-7),
            (PulseKind::ConvertSnailOutput, 10.0, PI / 1e7),
        ] {
            segs.push(PulseSegment {
                kind,
                amplitude: amp,
                phase: FRAC_PI_2,
                t_start: t,
                t_end: t + dur,
                rise_rate: nu,
                fall_rate: nu,
            });
            t += dur + 3.0 / nu;
        }
        let s = PulseSchedule {
            segments: segs,
            total_duration: t,
            dead_time: 0.0,
        };
        let tr = simulate_protocol(&s, &dev, default_dt(&s, &dev)).unwrap();
        let flip = DMatrix::from_fn(6, 6, |i, j| if i != j { 0.0 } else if i % 2 == 0 { 1.0 } else { -1.0 });
        for k in (0..tr.len()).step_by(97) {
            let (e, g) = (&tr.states[0][k], &tr.states[1][k]);
            let scale = e.cov.abs().max().max(1.0);
            assert!((&flip * &e.means - &g.means).abs().max() < 1e-9 * scale);
            assert!((&flip * &e.cov * &flip - &g.cov).abs().max() < 1e-9 * scale);
        }
    }

    #[test]
    fn full_sequence_shape() {
        let dev = DeviceParams::default();
        let rates = EffectiveRates::default();
        let (s, cal) = build_ea_sequence(&dev, &rates, 4.0, eta_for_photons(5.0, dev.chi())).unwrap();
        let tr = simulate_protocol_from(&s, &dev, default_dt(&s, &dev), 4, &GaussianState::vacuum(3)).unwrap();
        let conv = s.segment(PulseKind::ConvertReadoutSnail).unwrap();
        let out = s.segment(PulseKind::ConvertSnailOutput).unwrap();
        let at = |t: f64| tr.times.iter().position(|&x| x >= t).unwrap_or(tr.len() - 1);
        let (k0, k1) = (at(conv.t_start - 3.0 / conv.rise_rate), at(conv.t_end + 3.0 / conv.fall_rate));
        for b in 0..2 {
            let n_pre = tr.photon_readout[k0][b];
            assert!(tr.photon_readout[k1][b] <= (1.0 - cal.transfer_prob) * n_pre + 1e-3, "branch {b}");
            let (kpeak, _) = tr
                .photon_output
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |a, (k, p)| if p[b] > a.1 { (k, p[b]) } else { a });
            let tp = tr.times[kpeak];
            assert!(tp > out.t_start && tp < out.t_end + 5.0 / out.fall_rate, "peak at {tp}");
        }
        for b in 0..2 {
            for st in &tr.states[b] {
                assert!(st.min_uncertainty_eigenvalue() >= -1e-10);
            }
        }
    }


    fn drive_branch(nbar: f64, kappa: f64, chi: f64, pulse_t: f64, times: &[f64]) -> Vec<DVector<f64>> {
        let lam = (0.25 * kappa * kappa + chi * chi).sqrt();
        let eta = 2f64.sqrt() * nbar.sqrt() * lam;
        let on = Dynamics::new(&GeneratorSpec::zero(1).add_detuning(0, chi).with_decay(0, kappa).add_drive(0, eta, FRAC_PI_2)).unwrap();
        let off = Dynamics::new(&GeneratorSpec::zero(1).add_detuning(0, chi).with_decay(0, kappa)).unwrap();
        let mut st = GaussianState::vacuum(1);
        let mut out = Vec::new();
        let h: f64 = 1e-10;
        for &t in times {
            while st.time < t - 1e-15 {
                let dy = if st.time < pulse_t - 1e-15 { &on } else { &off };
                let step = h.min(t - st.time).min(if st.time < pulse_t { pulse_t - st.time } else { f64::INFINITY });
                st = dy.step(&st, step).unwrap();
            }
            out.push(st.means.clone());
        }
        out
    }

    #[test]
    fn cdr_means_match_simulation() {
        let (nbar, kappa, chi, pulse_t): (f64, f64, f64, f64) = (4.0, 6e6, 3e6, 6e-7);
        let times = [5e-8, 1.5e-7, 4e-7, 6e-7, 7e-7, 9e-7];
        let amp = 2f64.sqrt() * nbar.sqrt();
        for (b, s) in BRANCH_SIGN.iter().enumerate() {
            let sim = drive_branch(nbar, kappa, s * chi, pulse_t, &times);
            for (k, &t) in times.iter().enumerate() {
                let (x, y) = cdr_means(nbar, kappa, chi, t, pulse_t)[b];
                let q = DVector::from_vec(vec![2f64.sqrt() * x, 2f64.sqrt() * y]);
                assert!((&q - &sim[k]).norm() < 0.02 * amp, "branch {b} t {t}");
            }
        }
    }

    #[test]
    fn ea_means_match_simulation() {
        let dev = DeviceParams::default();
        let (chi, ga, gb) = (dev.chi(), dev.gamma(READOUT), dev.gamma(OUTPUT));
        let p = EaBurst {
            gain: 4.0,
            nbar: 2.0,
            chi,
            gamma_a: ga,
            gamma_b: gb,
            t_a: PI / (2.0 * chi),
            t_proc: 0.0,
            rise_rate: 2e8,
        };
        let r_amp = 1e7;
        let t_amp = p.gain.ln() / r_amp;
        for (b, s) in BRANCH_SIGN.iter().enumerate() {
            let field = drive_branch(p.nbar, ga, s * chi, p.t_a, &[p.t_a]).pop().unwrap();
            // Amplify p, de-amplify q, then let the released mode decay.
            let amp = propagator(&GeneratorSpec::zero(1).add_squeeze(0, r_amp, 1.5 * PI), t_amp).unwrap();
            let mut st = GaussianState::vacuum(1);
            st.means = amp.apply_means(&field);
            let dy = Dynamics::new(&GeneratorSpec::zero(1).with_decay(0, gb)).unwrap();
            let scale = p.gain * p.nbar.sqrt();
            for &t in &[5e-8, 1e-7, 2e-7] {
                let mut s2 = st.clone();
                let n = 2000;
                for _ in 0..n {
                    s2 = dy.step(&s2, t / n as f64).unwrap();
                }
                let (x, y) = ea_means(&p, t)[b];
                assert!((s2.means[1] / 2f64.sqrt() - x).abs() < 0.02 * scale, "branch {b} X at {t}");
                assert!((s2.means[0] / 2f64.sqrt() - y).abs() < 0.02 * scale, "branch {b} Y at {t}");
            }
        }
    }

    #[test]
    fn burst_exceeds_cdr_steady_state() {
        let dev = DeviceParams::default();
        let nbar = 5.0;
        let p = EaBurst {
            gain: 10.0,
            nbar,
            chi: dev.chi(),
            gamma_a: dev.gamma(READOUT),
            gamma_b: dev.gamma(OUTPUT),
            t_a: PI / (2.0 * dev.chi()),
            t_proc: 1e-7,
            rise_rate: 2e8,
        };
        let peak = (0..400)
            .map(|k| ea_means(&p, 1e-7 + k as f64 * 1e-9)[0].0.abs())
            .fold(0.0, f64::max);
        assert!(peak > 2.0 * nbar.sqrt(), "{peak}");
    }


    #[test]
    fn output_snr_of_free_decay() {
        // Output mode released from ±m with variance v0 and left to decay.
        let (gb, m, v0, eta, n_add) = (2e7, 1.3, 2.0, 0.8, 0.25);
        let n = 801;
        let l = 3e-7;
        let times: Vec<f64> = (0..n).map(|k| l * k as f64 / (n - 1) as f64).collect();
        let mk = |sign: f64, t: f64| {
            let mut st = GaussianState::vacuum(3);
            st.means[2 * OUTPUT] = sign * m * (-0.5 * gb * t).exp();
            let v = 0.5 + (v0 - 0.5) * (-gb * t).exp();
            st.cov[(2 * OUTPUT, 2 * OUTPUT)] = v;
            st.cov[(2 * OUTPUT + 1, 2 * OUTPUT + 1)] = v;
            st.time = t;
            st
        };
        let fund = |t: f64| {
            let mut f = DMatrix::<f64>::identity(6, 6);
            f[(4, 4)] = (-0.5 * gb * t).exp();
            f[(5, 5)] = (-0.5 * gb * t).exp();
            f
        };
        let zeros = vec![[0.0; 2]; n];
        let tr = Trajectory {
            states: [times.iter().map(|&t| mk(1.0, t)).collect(), times.iter().map(|&t| mk(-1.0, t)).collect()],
            fundamentals: [times.iter().map(|&t| fund(t)).collect(), times.iter().map(|&t| fund(t)).collect()],
            times: times.clone(),
            photon_readout: zeros.clone(),
            photon_snail: zeros.clone(),
            photon_output: zeros,
        };
        let got = output_snr(&tr, eta, gb, n_add, n, &[l]).unwrap()[0];
        let x = gb * l;
        let e = 1.0 - (-x).exp();
        let dq2 = 4.0 * m * m;
        let want = 2.0 * eta * dq2 * e / (0.5 + n_add + 2.0 * eta * ((v0 - 0.5) * e + 1.0 - x * (-x).exp() / e));
        assert!((got - want).abs() < 1e-4 * want, "{got} vs {want}");
    }

    proptest! {
        #[test]
        fn calibration_physical(r in 3.1e6..2e7f64, t in 0.0..3e-7f64) {
            let c = calibrate_squeeze(r, 3e6, t).unwrap();
            let s = squeeze_state_analytic(r, 0.0, 3e6, 0.0, &GaussianState::vacuum(1), t);
            prop_assert!(c.n_a >= -1e-12);
            prop_assert!((c.n_a - photon_number(&s, 0)).abs() < 1e-8 * c.n_a.max(1.0));
            prop_assert!(c.phi_chi > 0.0 && c.phi_chi <= FRAC_PI_2 + 1e-12);
        }

        #[test]
        fn separation_bounded(eta in 0.0..1e7f64, g in 0.0..1e6f64, t in 0.0..2e-6f64) {
            let chi = 3e6;
            prop_assert!(displacement_separation(eta, chi, g, t) <= 4.0 * eta / chi * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn transfer_sums_to_one(g in 1e5..1e8f64, chi in 0.0..1e7f64) {
            let c = conversion_transfer(g, chi);
            prop_assert!((c.p_a + c.p_s - 1.0).abs() < 1e-15);
            prop_assert!(c.p_s > 0.0 && c.p_s <= 1.0);
        }
    }
}
