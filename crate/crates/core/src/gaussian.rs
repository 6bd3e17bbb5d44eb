// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! N-mode Gaussian states and their linear dynamics.
//!
//! Quadratures are ordered (q1, p1, ..., qN, pN) with q = (a + a†)/√2, so the
//! vacuum covariance is I/2. Dynamics follow
//!
//! ```text
//! dμ/dt = A μ + d,   dV/dt = A V + V Aᵀ + Γ/2,   A = Ω H − Γ/2
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("decay rates must be non-negative and equal within a mode pair (mode {0})")]
    Decay(usize),
    #[error("non-finite value after step at t = {time:e} s")]
    NumericOverflow { time: f64 },
    #[error("‖A·t‖₁ = {norm:.3} exceeds 50; subdivide the interval")]
    Conditioning { norm: f64 },
    #[error("mode index {0} out of range")]
    Mode(usize),
}

/// Block-diagonal symplectic form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    pub n_modes: usize,
    pub matrix: DMatrix<f64>,
}

pub fn symplectic_form(n_modes: usize) -> SymplecticForm {
    let n = n_modes.max(1);
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    SymplecticForm {
        n_modes: n,
        matrix: m,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub means: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub time: f64,
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            means: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes) * 0.5,
            time: 0.0,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.means.len() / 2
    }

    /// Coherent amplitude α (complex, given as re/im) on `mode`.
    pub fn displaced(mut self, mode: usize, re: f64, im: f64) -> Self {
        self.means[2 * mode] = std::f64::consts::SQRT_2 * re;
        self.means[2 * mode + 1] = std::f64::consts::SQRT_2 * im;
        self
    }

    /// Smallest eigenvalue of the Hermitian matrix V + iΩ/2.
    ///
    /// Uses the real symmetric embedding [[V, -Ω/2], [Ω/2, V]], whose spectrum
    /// is that of the Hermitian matrix with every eigenvalue doubled.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let n = self.cov.nrows();
        let om = symplectic_form(n / 2).matrix * 0.5;
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        big.view_mut((n, n), (n, n)).copy_from(&self.cov);
        big.view_mut((0, n), (n, n)).copy_from(&(-&om));
        big.view_mut((n, 0), (n, n)).copy_from(&om);
        SymmetricEigen::new(big).eigenvalues.min()
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.min_uncertainty_eigenvalue() >= -tol
    }
}

/// Quadratic generator H, decay rates Γ (diagonal) and drive d.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub hmat: DMatrix<f64>,
    pub decay: DVector<f64>,
    pub drive: DVector<f64>,
}

impl GeneratorSpec {
    pub fn zero(n_modes: usize) -> Self {
        let d = 2 * n_modes;
        Self {
            hmat: DMatrix::zeros(d, d),
            decay: DVector::zeros(d),
            drive: DVector::zeros(d),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.hmat.nrows() / 2
    }

    pub fn validate(&self) -> Result<(), GaussianError> {
        let d = self.hmat.nrows();
        if self.hmat.ncols() != d || d % 2 != 0 {
            return Err(GaussianError::Dimension(format!(
                "hmat is {}x{}",
                self.hmat.nrows(),
                self.hmat.ncols()
            )));
        }
        if self.decay.len() != d || self.drive.len() != d {
            return Err(GaussianError::Dimension(format!(
                "hmat {d}, decay {}, drive {}",
                self.decay.len(),
                self.drive.len()
            )));
        }
        for k in 0..d / 2 {
            let (a, b) = (self.decay[2 * k], self.decay[2 * k + 1]);
            if a < 0.0 || (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(GaussianError::Decay(k));
            }
        }
        Ok(())
    }

    pub fn with_decay(mut self, mode: usize, gamma: f64) -> Self {
        self.decay[2 * mode] = gamma;
        self.decay[2 * mode + 1] = gamma;
        self
    }

    // Adds a Hamiltonian drift block G; the stored form is H = -Ω G.
    fn add_drift(&mut self, rows: [usize; 2], cols: [usize; 2], g: [[f64; 2]; 2]) {
        // -Ω maps rows (q, p) of G to rows (-p, q) of H.
        for (c, &col) in cols.iter().enumerate() {
            self.hmat[(rows[0], col)] += -g[1][c];
            self.hmat[(rows[1], col)] += g[0][c];
        }
    }

    /// Frame detuning δ on `mode` (H = δ a†a).
    pub fn add_detuning(mut self, mode: usize, delta: f64) -> Self {
        let r = [2 * mode, 2 * mode + 1];
        self.add_drift(r, r, [[0.0, delta], [-delta, 0.0]]);
        self
    }

    /// Single-mode squeezing at rate `r` and pump phase `phi`.
    pub fn add_squeeze(mut self, mode: usize, r: f64, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let m = [2 * mode, 2 * mode + 1];
        self.add_drift(m, m, [[r * s, -r * c], [-r * c, -r * s]]);
        self
    }

    /// Beam-splitter conversion H = (g/2)(e^{iθ} a_i† a_j + h.c.).
    pub fn add_conversion(mut self, i: usize, j: usize, g: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let h = 0.5 * g;
        let mi = [2 * i, 2 * i + 1];
        let mj = [2 * j, 2 * j + 1];
        self.add_drift(mi, mj, [[h * s, h * c], [-h * c, h * s]]);
        self.add_drift(mj, mi, [[-h * s, h * c], [-h * c, -h * s]]);
        self
    }

    /// Coherent drive dα/dt = -iη e^{iθ}.
    pub fn add_drive(mut self, mode: usize, eta: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        self.drive[2 * mode] += eta * s;
        self.drive[2 * mode + 1] += -eta * c;
        self
    }
}

/// A = Ω H − Γ/2.
pub fn build_drift(spec: &GeneratorSpec) -> Result<DMatrix<f64>, GaussianError> {
    spec.validate()?;
    let om = symplectic_form(spec.n_modes()).matrix;
    let mut a = om * &spec.hmat;
    for k in 0..a.nrows() {
        a[(k, k)] -= 0.5 * spec.decay[k];
    }
    Ok(a)
}

/// Precompiled right-hand side for repeated stepping with a fixed generator.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub drift: DMatrix<f64>,
    pub noise: DVector<f64>,
    pub drive: DVector<f64>,
}

impl Dynamics {
    pub fn new(spec: &GeneratorSpec) -> Result<Self, GaussianError> {
        Ok(Self {
            drift: build_drift(spec)?,
            noise: spec.decay.clone() * 0.5,
            drive: spec.drive.clone(),
        })
    }

    fn rhs(&self, mu: &DVector<f64>, v: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let dmu = &self.drift * mu + &self.drive;
        let av = &self.drift * v;
        let mut dv = &av + av.transpose();
        for k in 0..dv.nrows() {
            dv[(k, k)] += self.noise[k];
        }
        (dmu, dv)
    }

    pub fn step(&self, state: &GaussianState, dt: f64) -> Result<GaussianState, GaussianError> {
        step_varying(state, self, self, self, dt)
    }
}

/// RK4 step for a time-dependent generator sampled at t, t + dt/2 and t + dt.
pub fn step_varying(
    state: &GaussianState,
    d0: &Dynamics,
    dm: &Dynamics,
    d1: &Dynamics,
    dt: f64,
) -> Result<GaussianState, GaussianError> {
    let (mu, v) = (&state.means, &state.cov);
    let (k1m, k1v) = d0.rhs(mu, v);
    let (k2m, k2v) = dm.rhs(&(mu + &k1m * (0.5 * dt)), &(v + &k1v * (0.5 * dt)));
    let (k3m, k3v) = dm.rhs(&(mu + &k2m * (0.5 * dt)), &(v + &k2v * (0.5 * dt)));
    let (k4m, k4v) = d1.rhs(&(mu + &k3m * dt), &(v + &k3v * dt));
    let means = mu + (k1m + (k2m + k3m) * 2.0 + k4m) * (dt / 6.0);
    let cov = v + (k1v + (k2v + k3v) * 2.0 + k4v) * (dt / 6.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    let time = state.time + dt;
    if means.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
        return Err(GaussianError::NumericOverflow { time });
    }
    Ok(GaussianState { means, cov, time })
}

/// RK4 step of the fundamental matrix dΦ/dt = A(t)Φ.
pub fn step_fundamental(
    phi: &DMatrix<f64>,
    d0: &Dynamics,
    dm: &Dynamics,
    d1: &Dynamics,
    dt: f64,
) -> DMatrix<f64> {
    let k1 = &d0.drift * phi;
    let k2 = &dm.drift * (phi + &k1 * (0.5 * dt));
    let k3 = &dm.drift * (phi + &k2 * (0.5 * dt));
    let k4 = &d1.drift * (phi + &k3 * dt);
    phi + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
}

/// One RK4 step of the means and Lyapunov equations.
pub fn step(
    state: &GaussianState,
    spec: &GeneratorSpec,
    dt: f64,
) -> Result<GaussianState, GaussianError> {
    Dynamics::new(spec)?.step(state, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorMatrix {
    pub matrix: DMatrix<f64>,
    pub duration: f64,
    pub lossless: bool,
}

impl PropagatorMatrix {
    /// Symplectic defect ‖SᵀΩS − Ω‖∞.
    pub fn symplectic_defect(&self) -> f64 {
        let om = symplectic_form(self.matrix.nrows() / 2).matrix;
        let d = self.matrix.transpose() * &om * &self.matrix - om;
        d.abs().max()
    }

    /// Propagates means only (drive-free).
    pub fn apply_means(&self, mu: &DVector<f64>) -> DVector<f64> {
        &self.matrix * mu
    }
}

pub fn propagator(spec: &GeneratorSpec, t: f64) -> Result<PropagatorMatrix, GaussianError> {
    let a = build_drift(spec)? * t;
    Ok(PropagatorMatrix {
        matrix: expm(&a)?,
        duration: t,
        lossless: spec.decay.iter().all(|&g| g == 0.0),
    })
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    let n = a.nrows();
    let norm = one_norm(a);
    if norm > 50.0 {
        return Err(GaussianError::Conditioning { norm });
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-s);
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let v_inner = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| GaussianError::Dimension("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

// Scalar pieces of the detuned squeeze propagator S = c(t)·I + s(t)·M.
// `sigma` is +1 in the hyperbolic regime, -1 in the trigonometric one and 0
// at the degenerate point r = χ.
#[derive(Debug, Clone, Copy)]
struct SqueezeBranch {
    k: f64,
    sigma: f64,
}

impl SqueezeBranch {
    fn new(r: f64, chi: f64) -> Self {
        let d = r * r - chi * chi;
        if d.abs() <= 1e-6 * r * r {
            Self { k: 0.0, sigma: 0.0 }
        } else if d > 0.0 {
            Self {
                k: d.sqrt(),
                sigma: 1.0,
            }
        } else {
            Self {
                k: (-d).sqrt(),
                sigma: -1.0,
            }
        }
    }

    // (c, s) with c = cosh kt, s = sinh(kt)/k (or trig / series analogues).
    fn cs(&self, t: f64) -> (f64, f64) {
        let x = self.k * t;
        match self.sigma {
            s if s > 0.0 => (x.cosh(), x.sinh() / self.k),
            s if s < 0.0 => (x.cos(), x.sin() / self.k),
            _ => (1.0, t),
        }
    }
}

fn squeeze_m(r: f64, phi: f64, chi: f64) -> [[f64; 2]; 2] {
    let (s, c) = phi.sin_cos();
    [[r * s, chi - r * c], [-(chi + r * c), -r * s]]
}

/// Closed-form single-mode propagator for squeezing under detuning and loss.
pub fn propagate_squeeze_analytic(r: f64, phi: f64, chi: f64, gamma: f64, t: f64) -> PropagatorMatrix {
    let br = SqueezeBranch::new(r, chi);
    let (c, s) = br.cs(t);
    let m = squeeze_m(r, phi, chi);
    let e = (-0.5 * gamma * t).exp();
    let matrix = DMatrix::from_row_slice(
        2,
        2,
        &[
            e * (c + s * m[0][0]),
            e * s * m[0][1],
            e * s * m[1][0],
            e * (c + s * m[1][1]),
        ],
    );
    PropagatorMatrix {
        matrix,
        duration: t,
        lossless: gamma == 0.0,
    }
}

// ∫_0^t e^{-γu} f(u) du for f = 1, cosh/cos(2ku), sinh/sin(2ku), and the
// degenerate polynomials u, u².
fn exp_integrals(gamma: f64, k: f64, sigma: f64, t: f64) -> [f64; 3] {
    let i0 = if gamma == 0.0 {
        t
    } else {
        (1.0 - (-gamma * t).exp()) / gamma
    };
    if sigma == 0.0 {
        // [∫e^{-γu}, ∫u e^{-γu}, ∫u² e^{-γu}]
        if gamma == 0.0 {
            return [t, t * t / 2.0, t * t * t / 3.0];
        }
        let e = (-gamma * t).exp();
        let i1 = (1.0 - e * (1.0 + gamma * t)) / (gamma * gamma);
        let i2 = (2.0 - e * (2.0 + 2.0 * gamma * t + gamma * gamma * t * t)) / gamma.powi(3);
        return [i0, i1, i2];
    }
    let w = 2.0 * k;
    if sigma > 0.0 {
        // e^{-γu}cosh(wu) = (e^{(w-γ)u} + e^{-(w+γ)u})/2
        let ip = exp_int(w - gamma, t);
        let im = exp_int(-(w + gamma), t);
        [i0, 0.5 * (ip + im), 0.5 * (ip - im)]
    } else {
        let e = (-gamma * t).exp();
        let den = gamma * gamma + w * w;
        let (sn, cs) = (w * t).sin_cos();
        let ic = (gamma - e * (gamma * cs - w * sn)) / den;
        let is = (w - e * (gamma * sn + w * cs)) / den;
        [i0, ic, is]
    }
}

// ∫_0^t e^{a u} du
fn exp_int(a: f64, t: f64) -> f64 {
    if (a * t).abs() < 1e-8 {
        t * (1.0 + 0.5 * a * t)
    } else {
        (a * t).exp_m1() / a
    }
}

/// Closed-form means and covariance for a single detuned, lossy squeezed mode
/// started from (μ₀, V₀), vacuum bath.
pub fn squeeze_state_analytic(
    r: f64,
    phi: f64,
    chi: f64,
    gamma: f64,
    init: &GaussianState,
    t: f64,
) -> GaussianState {
    let s = propagate_squeeze_analytic(r, phi, chi, gamma, t).matrix;
    let means = &s * &init.means;
    let mut cov = &s * &init.cov * s.transpose();
    // ∫ S(u) (γ/2) S(u)ᵀ du with S(u) = e^{-γu/2}(c I + s M).
    let br = SqueezeBranch::new(r, chi);
    let m = DMatrix::from_row_slice(2, 2, &squeeze_m(r, phi, chi).concat());
    let msym = &m + m.transpose();
    let mmt = &m * m.transpose();
    let id = DMatrix::<f64>::identity(2, 2);
    let [i0, ic, is] = exp_integrals(gamma, br.k, br.sigma, t);
    let noise = if br.sigma == 0.0 {
        // c = 1, s = u
        &id * i0 + &msym * ic + &mmt * is
    } else {
        let k = br.k;
        // c² = (1 + C)/2, c s = S/(2k), s² = σ(C − 1)/(2k²)
        &id * (0.5 * (i0 + ic))
            + &msym * (is / (2.0 * k))
            + &mmt * (br.sigma * (ic - i0) / (2.0 * k * k))
    };
    cov += noise * (0.5 * gamma);
    GaussianState {
        means,
        cov,
        time: init.time + t,
    }
}

/// Mean photon number of one mode.
pub fn photon_number(state: &GaussianState, mode: usize) -> f64 {
    let (q, p) = (2 * mode, 2 * mode + 1);
    0.5 * (state.cov[(q, q)] + state.cov[(p, p)] - 1.0)
        + 0.5 * (state.means[q].powi(2) + state.means[p].powi(2))
}

/// Reduced 2x2 covariance of one mode.
pub fn mode_cov(state: &GaussianState, mode: usize) -> DMatrix<f64> {
    state.cov.view((2 * mode, 2 * mode), (2, 2)).into_owned()
}
