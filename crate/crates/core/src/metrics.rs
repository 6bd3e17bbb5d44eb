// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Discrimination statistics and the homodyne integrated-current model.

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;
use std::f64::consts::SQRT_2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate separation")]
    DegenerateSeparation,
    #[error("pooled covariance is singular")]
    Singular,
    #[error("no threshold between the means")]
    NoThreshold,
    #[error("degenerate filter: zero contrast")]
    DegenerateFilter,
    #[error("grid mismatch: {0}")]
    Grid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationInput {
    pub mu_e: DVector<f64>,
    pub mu_g: DVector<f64>,
    pub cov_e: DMatrix<f64>,
    pub cov_g: DMatrix<f64>,
}

impl DiscriminationInput {
    fn pooled_solve(&self) -> Result<(DVector<f64>, DVector<f64>), MetricsError> {
        let dmu = &self.mu_e - &self.mu_g;
        let pooled = &self.cov_e + &self.cov_g;
        let chol = pooled.cholesky().ok_or(MetricsError::Singular)?;
        Ok((chol.solve(&dmu), dmu))
    }
}

/// Unit LDA projection axis ∝ (V_e + V_g)⁻¹ Δμ.
pub fn lda_axis(input: &DiscriminationInput) -> Result<DVector<f64>, MetricsError> {
    let (w, dmu) = input.pooled_solve()?;
    if dmu.norm() == 0.0 {
        return Err(MetricsError::DegenerateSeparation);
    }
    Ok(w.normalize())
}

/// D² = Δμᵀ (V_e + V_g)⁻¹ Δμ.
pub fn fisher_discriminant(input: &DiscriminationInput) -> Result<f64, MetricsError> {
    let (w, dmu) = input.pooled_solve()?;
    Ok(dmu.dot(&w).max(0.0))
}

/// Converts a pooled-covariance Fisher value to the squared SNR used by
/// [`error_probability`]; for equal covariances the two differ by 2.
pub fn fisher_to_snr(d2_fisher: f64) -> f64 {
    2.0 * d2_fisher
}

/// Equal-prior misclassification probability for squared SNR `d2`.
pub fn error_probability(d2: f64) -> f64 {
    0.5 * erfc(d2.max(0.0).sqrt() / (2.0 * SQRT_2))
}

/// Optimal threshold between two 1-D Gaussians with unequal widths.
pub fn threshold_unequal(mu1: f64, mu2: f64, s1: f64, s2: f64) -> Result<(f64, f64), MetricsError> {
    let (lo, hi, slo, shi) = if mu1 <= mu2 {
        (mu1, mu2, s1, s2)
    } else {
        (mu2, mu1, s2, s1)
    };
    let x = if (slo - shi).abs() <= 1e-15 * slo.max(shi) || lo == hi {
        0.5 * (lo + hi)
    } else {
        // (x-lo)²/(2 slo²) − (x-hi)²/(2 shi²) = ln(shi/slo)
        let (a1, a2) = (1.0 / (slo * slo), 1.0 / (shi * shi));
        let a = 0.5 * (a1 - a2);
        let b = -(lo * a1 - hi * a2);
        let c = 0.5 * (lo * lo * a1 - hi * hi * a2) - (shi / slo).ln();
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(MetricsError::NoThreshold);
        }
        let sq = disc.sqrt();
        let roots = [(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)];
        *roots
            .iter()
            .find(|&&r| r >= lo - 1e-12 && r <= hi + 1e-12)
            .ok_or(MetricsError::NoThreshold)?
    };
    let p = 0.25 * (erfc((x - lo) / (SQRT_2 * slo)) + erfc((hi - x) / (SQRT_2 * shi)));
    Ok((x, p))
}

/// F = (1 − p_mis)·e^{−T/T1}.
pub fn assignment_fidelity(d2: f64, total_t: f64, t1: f64) -> f64 {
    let p_mis = if d2.is_infinite() { 0.0 } else { error_probability(d2) };
    (1.0 - p_mis) * (-total_t / t1).exp()
}

pub fn nines(fidelity: f64) -> f64 {
    -(1.0 - fidelity).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub v_xx: f64,
    pub v_pp: f64,
    pub c_xp: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl KernelParams {
    pub fn vacuum(gamma: f64, delta: f64) -> Self {
        Self {
            v_xx: 0.5,
            v_pp: 0.5,
            c_xp: 0.0,
            gamma,
            delta,
        }
    }
}

/// Symmetrized two-time correlation of the intracavity q quadrature.
pub fn noise_kernel(kp: &KernelParams, t1: f64, t2: f64) -> f64 {
    let (t1, t2) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
    let tau = t1 - t2;
    let s = t1 + t2;
    let KernelParams {
        v_xx,
        v_pp,
        c_xp,
        gamma,
        delta,
    } = *kp;
    let normal = (-0.5 * gamma * tau).exp()
        * (delta * tau).cos()
        * (0.5 + 0.5 * (-gamma * t2).exp() * (v_xx + v_pp - 1.0));
    let anomalous = 0.5
        * (-0.5 * gamma * s).exp()
        * ((v_xx - v_pp) * (delta * s).cos() + 2.0 * c_xp * (delta * s).sin());
    normal + anomalous
}

/// Trapezoid weights for a (possibly non-uniform) grid.
pub fn trapz_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (times[i] - times[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

pub fn trapz(times: &[f64], values: &[f64]) -> f64 {
    trapz_weights(times)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneModel {
    pub eta: f64,
    pub gamma_meas: f64,
    pub n_add: f64,
    pub times: Vec<f64>,
    pub contrast: Vec<f64>,
    pub filter: Vec<f64>,
}

impl HomodyneModel {
    /// Model with the matched filter of `contrast`.
    pub fn matched(
        eta: f64,
        gamma_meas: f64,
        n_add: f64,
        times: Vec<f64>,
        contrast: Vec<f64>,
    ) -> Result<Self, MetricsError> {
        let filter = matched_filter(&times, &contrast)?;
        Ok(Self {
            eta,
            gamma_meas,
            n_add,
            times,
            contrast,
            filter,
        })
    }

    fn check(&self) -> Result<(), MetricsError> {
        let n = self.times.len();
        if self.contrast.len() != n || self.filter.len() != n {
            return Err(MetricsError::Grid(format!(
                "times {n}, contrast {}, filter {}",
                self.contrast.len(),
                self.filter.len()
            )));
        }
        Ok(())
    }

    // Grid points with t ≤ T.
    fn upto(&self, t_max: f64) -> usize {
        self.times.iter().take_while(|&&t| t <= t_max * (1.0 + 1e-12)).count()
    }
}

/// g(t) = ΔI(t)/‖ΔI‖.
pub fn matched_filter(times: &[f64], contrast: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if times.len() != contrast.len() {
        return Err(MetricsError::Grid("times/contrast length".into()));
    }
    let sq: Vec<f64> = contrast.iter().map(|c| c * c).collect();
    let norm = trapz(times, &sq).sqrt();
    if !(norm > 0.0) {
        return Err(MetricsError::DegenerateFilter);
    }
    Ok(contrast.iter().map(|c| c / norm).collect())
}

/// Var[Z(T)] = (1/2 + n_add)∫g² + 2ηγ ∬ g g Γ_XX.
pub fn integrated_variance(
    model: &HomodyneModel,
    kernel: &dyn Fn(f64, f64) -> f64,
    t_max: f64,
) -> Result<f64, MetricsError> {
    model.check()?;
    let m = model.upto(t_max);
    let t = &model.times[..m];
    let w = trapz_weights(t);
    let g = &model.filter[..m];
    let shot: f64 = (0..m).map(|i| w[i] * g[i] * g[i]).sum();
    let mut cav = 0.0;
    for i in 0..m {
        let wi = w[i] * g[i];
        if wi == 0.0 {
            continue;
        }
        let mut row = 0.5 * w[i] * g[i] * kernel(t[i], t[i]);
        for j in 0..i {
            row += w[j] * g[j] * kernel(t[i], t[j]);
        }
        cav += 2.0 * wi * row;
    }
    Ok((0.5 + model.n_add) * shot + 2.0 * model.eta * model.gamma_meas * cav)
}

/// D² = (∫ g ΔI)² / Var[Z].
pub fn integrated_snr(
    model: &HomodyneModel,
    kernel: &dyn Fn(f64, f64) -> f64,
    t_max: f64,
) -> Result<f64, MetricsError> {
    model.check()?;
    let m = model.upto(t_max);
    let prod: Vec<f64> = (0..m).map(|i| model.filter[i] * model.contrast[i]).collect();
    let signal = trapz(&model.times[..m], &prod);
    if signal == 0.0 {
        return Ok(0.0);
    }
    Ok(signal * signal / integrated_variance(model, kernel, t_max)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iso(mu_e: Vec<f64>, mu_g: Vec<f64>, var: f64) -> DiscriminationInput {
        let n = mu_e.len();
        DiscriminationInput {
            mu_e: DVector::from_vec(mu_e),
            mu_g: DVector::from_vec(mu_g),
            cov_e: DMatrix::identity(n, n) * var,
            cov_g: DMatrix::identity(n, n) * var,
        }
    }

    #[test]
    fn lda_isotropic_axis() {
        let w = lda_axis(&iso(vec![1.0, 0.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0, 0.0], 0.5)).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert_eq!(
            lda_axis(&iso(vec![0.0, 0.0], vec![0.0, 0.0], 0.5)),
            Err(MetricsError::DegenerateSeparation)
        );
    }

    #[test]
    fn fisher_one_dimensional() {
        let (m, s2) = (3.0, 0.7);
        let d2 = fisher_discriminant(&iso(vec![m / 2.0], vec![-m / 2.0], s2)).unwrap();
        assert!((d2 - m * m / (2.0 * s2)).abs() < 1e-12);
        assert_eq!(fisher_discriminant(&iso(vec![0.2], vec![0.2], 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn error_probability_values() {
        assert_eq!(error_probability(0.0), 0.5);
        assert!(error_probability(1e6) < 1e-100);
        assert!((error_probability(32.0) - 0.5 * erfc(2.0)).abs() < 1e-15);
        assert!((error_probability(32.0) - 2.339e-3).abs() < 1e-6);
    }

    #[test]
    fn threshold_cases() {
        let (x, p) = threshold_unequal(1.0, 3.0, 0.4, 0.4).unwrap();
        assert_eq!(x, 2.0);
        assert!((p - 0.5 * erfc(1.0 / (SQRT_2 * 0.4))).abs() < 1e-15);
        let (_, p) = threshold_unequal(2.0, 2.0, 0.3, 0.9).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn threshold_matches_density_crossing() {
        let (x, p) = threshold_unequal(0.0, 4.0, 1.0, 2.0).unwrap();
        let pdf = |x: f64, m: f64, s: f64| (-(x - m).powi(2) / (2.0 * s * s)).exp() / s;
        assert!((pdf(x, 0.0, 1.0) - pdf(x, 4.0, 2.0)).abs() < 1e-12);
        // Tail masses by direct quadrature of the densities.
        let n = 400_000;
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        let tail = |a: f64, b: f64, m: f64, sd: f64| {
            let h = (b - a) / n as f64;
            (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * pdf(a + i as f64 * h, m, sd) / norm
                })
                .sum::<f64>()
                * h
        };
        let want = 0.5 * (tail(x, 20.0, 0.0, 1.0) + tail(-40.0, x, 4.0, 2.0));
        assert!((p - want).abs() < 1e-9, "{p} vs {want}");
    }

    #[test]
    fn fidelity_cap() {
        assert_eq!(assignment_fidelity(f64::INFINITY, 0.0, 50e-6), 1.0);
        let f = assignment_fidelity(f64::INFINITY, 0.3e-6, 50e-6);
        assert!((f - (-0.006f64).exp()).abs() < 1e-15);
        assert!((f - 0.994018).abs() < 1e-6);
    }

    #[test]
    fn fidelity_monotone_in_d2() {
        let mut prev = assignment_fidelity(0.0, 1e-6, 50e-6);
        for k in 1..200 {
            let f = assignment_fidelity(k as f64 * 0.25, 1e-6, 50e-6);
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn kernel_vacuum_limits() {
        let kp = KernelParams::vacuum(2e6, 3e6);
        for t in [0.0, 1e-7, 3e-6] {
            assert!((noise_kernel(&kp, t, t) - 0.5).abs() < 1e-15);
        }
        let kp = KernelParams::vacuum(2e6, 0.0);
        let (t1, t2): (f64, f64) = (1.5e-6, 0.4e-6);
        let want = 0.5 * (-0.5 * 2e6 * (t1 - t2)).exp();
        assert!((noise_kernel(&kp, t1, t2) - want).abs() < 1e-15);
        assert_eq!(noise_kernel(&kp, t1, t2), noise_kernel(&kp, t2, t1));
    }

    fn grid(t: f64, m: usize) -> Vec<f64> {
        (0..m).map(|i| t * i as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn shot_noise_only() {
        let times = grid(1e-6, 101);
        let model = HomodyneModel::matched(1.0, 1e6, 0.0, times.clone(), vec![1.0; 101]).unwrap();
        let zero = |_: f64, _: f64| 0.0;
        assert!((integrated_variance(&model, &zero, 1e-6).unwrap() - 0.5).abs() < 1e-12);
        let model = HomodyneModel { n_add: 1.0, ..model };
        assert!((integrated_variance(&model, &zero, 1e-6).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn vacuum_boxcar_double_integral() {
        let (gamma, t) = (5e6, 2e-6);
        let times = grid(t, 3001);
        let model = HomodyneModel::matched(0.8, gamma, 0.0, times, vec![1.0; 3001]).unwrap();
        let kp = KernelParams::vacuum(gamma, 0.0);
        let v = integrated_variance(&model, &|a, b| noise_kernel(&kp, a, b), t).unwrap();
        // (1/T)∬ ½e^{-γ|t1−t2|/2} = (2/γ)[1 − (2/(γT))(1 − e^{-γT/2})]
        let k = 0.5 * gamma;
        let dbl = (1.0 / t) * (2.0 / k) * 0.5 * (t - (1.0 - (-k * t).exp()) / k);
        let want = 0.5 + 2.0 * 0.8 * gamma * dbl;
        assert!((v - want).abs() / want < 1e-6, "{v} vs {want}");
    }

    #[test]
    fn matched_filter_properties() {
        let times = grid(2e-6, 401);
        let g = matched_filter(&times, &vec![3.0; 401]).unwrap();
        assert!(g.iter().all(|x| (x - 1.0 / 2e-6f64.sqrt()).abs() < 1e-6));
        let gamma = 3e6;
        let c: Vec<f64> = times.iter().map(|t| (-0.5 * gamma * t).exp()).collect();
        let c2: Vec<f64> = c.iter().map(|x| 7.0 * x).collect();
        let g1 = matched_filter(&times, &c).unwrap();
        let g2 = matched_filter(&times, &c2).unwrap();
        let norm = (gamma / (1.0 - (-gamma * 2e-6f64).exp())).sqrt();
        for i in 0..401 {
            assert!((g1[i] - g2[i]).abs() < 1e-9);
            assert!((g1[i] - norm * c[i]).abs() / norm < 1e-5);
        }
        assert_eq!(matched_filter(&times, &vec![0.0; 401]), Err(MetricsError::DegenerateFilter));
    }

    #[test]
    fn white_noise_snr() {
        let times = grid(1e-6, 501);
        let c: Vec<f64> = times.iter().map(|t| 1e3 * (1.0 - (-3e6 * t).exp())).collect();
        let model = HomodyneModel::matched(1.0, 1e6, 0.5, times.clone(), c.clone()).unwrap();
        let d2 = integrated_snr(&model, &|_, _| 0.0, 1e-6).unwrap();
        let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
        assert!((d2 - trapz(&times, &sq) / 1.0).abs() / d2 < 1e-12);
        let z = HomodyneModel::matched(1.0, 1e6, 0.5, times.clone(), c).unwrap();
        let zero = HomodyneModel {
            contrast: vec![0.0; 501],
            ..z
        };
        assert_eq!(integrated_snr(&zero, &|_, _| 0.0, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn grid_mismatch() {
        let model = HomodyneModel {
            eta: 1.0,
            gamma_meas: 1.0,
            n_add: 0.0,
            times: vec![0.0, 1.0],
            contrast: vec![1.0],
            filter: vec![1.0, 1.0],
        };
        assert!(matches!(
            integrated_variance(&model, &|_, _| 0.0, 1.0),
            Err(MetricsError::Grid(_))
        ));
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.3
    }

    fn random_input(seed: u64) -> DiscriminationInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DiscriminationInput {
            mu_e: DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)),
            mu_g: DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)),
            cov_e: random_spd(&mut rng, 6),
            cov_g: random_spd(&mut rng, 6),
        }
    }

    #[test]
    fn lda_matches_generalized_eigenvector() {
        for seed in 0..5 {
            let inp = random_input(seed);
            let dmu = &inp.mu_e - &inp.mu_g;
            let sb = &dmu * dmu.transpose();
            let sw = &inp.cov_e + &inp.cov_g;
            // Whitened problem L⁻¹ S_b L⁻ᵀ y = J y, w = L⁻ᵀ y.
            let l = sw.clone().cholesky().unwrap().l();
            let li = l.clone().try_inverse().unwrap();
            let m = &li * &sb * li.transpose();
            let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
            let k = eig.eigenvalues.imax();
            let w_ref = (li.transpose() * eig.eigenvectors.column(k)).normalize();
            let w = lda_axis(&inp).unwrap();
            assert!(w.dot(&w_ref).abs() > 1.0 - 1e-9);
            assert!((eig.eigenvalues[k] - fisher_discriminant(&inp).unwrap()).abs() < 1e-9 * eig.eigenvalues[k]);
        }
    }

    #[test]
    fn lda_error_matches_monte_carlo() {
        let inp = random_input(11);
        let w = lda_axis(&inp).unwrap();
        let d2 = fisher_discriminant(&inp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let normal = StandardNormal;
        let le = inp.cov_e.clone().cholesky().unwrap().l();
        let lg = inp.cov_g.clone().cholesky().unwrap().l();
        // The LDA projection of each branch is Gaussian; sample the projected scalars.
        let (se, sg) = ((le.transpose() * &w).norm(), (lg.transpose() * &w).norm());
        let (me, mg) = (inp.mu_e.dot(&w), inp.mu_g.dot(&w));
        let thr = 0.5 * (me + mg);
        let mut wrong = 0usize;
        for k in 0..n {
            let z: f64 = normal.sample(&mut rng);
            if k % 2 == 0 {
                wrong += (me + se * z < thr) as usize;
            } else {
                wrong += (mg + sg * z > thr) as usize;
            }
        }
        let p_mc = wrong as f64 / n as f64;
        let p = error_probability(fisher_to_snr(d2));
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        // Midpoint thresholding is exact for the pooled width.
        let p_mid = 0.5 * (0.5 * erfc((me - thr) / (SQRT_2 * se)) + 0.5 * erfc((thr - mg) / (SQRT_2 * sg)));
        assert!((p_mc - p_mid).abs() < 3.0 * sigma, "{p_mc} vs {p_mid}");
        if (se - sg).abs() < 1e-3 * se {
            assert!((p_mc - p).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn lda_error_matches_monte_carlo_equal_covariance() {
        let mut inp = random_input(5);
        inp.cov_g = inp.cov_e.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = inp.cov_e.clone().cholesky().unwrap().l();
        let w = lda_axis(&inp).unwrap();
        let thr = 0.5 * (inp.mu_e.dot(&w) + inp.mu_g.dot(&w));
        let n = 1_000_000;
        let mut wrong = 0usize;
        for k in 0..n {
            let z = DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
            let (mu, side) = if k % 2 == 0 { (&inp.mu_e, 1.0) } else { (&inp.mu_g, -1.0) };
            let x = mu + &l * z;
            if side * (x.dot(&w) - thr) < 0.0 {
                wrong += 1;
            }
        }
        let p = error_probability(fisher_to_snr(fisher_discriminant(&inp).unwrap()));
        let p_mc = wrong as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_mc - p).abs() < 3.0 * sigma, "{p_mc} vs {p}");
    }

    proptest! {
        #[test]
        fn monotone_links(a in 0.0..200.0f64, b in 1e-6..50.0f64, t in 0.0..1e-5f64) {
            prop_assert!(error_probability(a + b) < error_probability(a));
            prop_assert!(assignment_fidelity(a + b, t, 5e-5) > assignment_fidelity(a, t, 5e-5));
        }

        #[test]
        fn congruence_invariance(seed in 0u64..1000) {
            let inp = random_input(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let m = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-0.3..0.3)) + DMatrix::identity(6, 6) * 3.0;
            let mapped = DiscriminationInput {
                mu_e: &m * &inp.mu_e,
                mu_g: &m * &inp.mu_g,
                cov_e: &m * &inp.cov_e * m.transpose(),
                cov_g: &m * &inp.cov_g * m.transpose(),
            };
            let (a, b) = (fisher_discriminant(&inp).unwrap(), fisher_discriminant(&mapped).unwrap());
            prop_assert!((a - b).abs() < 1e-10 * a.max(1.0));
        }

        #[test]
        fn matched_filter_beats_random(seed in 0u64..200, n_add in 0.0..2.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let times = grid(1e-6, 101);
            let c: Vec<f64> = times.iter().map(|t| (t * 4e6).sin() + rng.gen_range(-0.3..0.3)).collect();
            let m = HomodyneModel::matched(0.9, 1e6, n_add, times.clone(), c.clone()).unwrap();
            let best = integrated_snr(&m, &|_, _| 0.0, 1e-6).unwrap();
            for _ in 0..100 {
                let raw: Vec<f64> = (0..101).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let filter = matched_filter(&times, &raw).unwrap();
                let other = HomodyneModel { filter, ..m.clone() };
                prop_assert!(integrated_snr(&other, &|_, _| 0.0, 1e-6).unwrap() <= best * (1.0 + 1e-12));
            }
        }
    }
}
