//! Independent finite-difference time-domain propagator used to validate the
//! spectral evolution. Crank-Nicolson on a large box with Dirichlet walls:
//! unconditionally stable, norm-preserving to solver roundoff, second order
//! in both steps. Shares no code path with the spectral module.

use num_complex::Complex64;
use thiserror::Error;

use crate::potential::PiecewisePotential;
use crate::spectral::{EvolutionResult, WaveFunction};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("requested times must be nondecreasing multiples of dt")]
    BadTimes,
    #[error("grid too small: need at least 16 points")]
    BadGrid,
    #[error("mismatched time lists or grids")]
    Misaligned,
}

/// Complex samples on a uniform grid over [-B, B].
#[derive(Debug, Clone)]
pub struct GridWave {
    x0: f64,
    dx: f64,
    values: Vec<Complex64>,
}

impl GridWave {
    pub fn new(x0: f64, dx: f64, values: Vec<Complex64>) -> Result<Self, OracleError> {
        if values.len() < 16 || !(dx > 0.0) {
            return Err(OracleError::BadGrid);
        }
        Ok(GridWave { x0, dx, values })
    }

    /// Samples ψ on a box [-box_half, box_half]; the box must be generous
    /// enough that flux leaving the observation window cannot bounce off the
    /// walls and return within the simulated horizon.
    pub fn from_wavefunction(psi: &dyn WaveFunction, box_half: f64, dx: f64) -> Result<Self, OracleError> {
        let n = (2.0 * box_half / dx).round() as usize + 1;
        if n < 16 {
            return Err(OracleError::BadGrid);
        }
        let values = (0..n).map(|i| psi.eval(-box_half + dx * i as f64)).collect();
        Ok(GridWave { x0: -box_half, dx, values })
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x0 + self.dx * i as f64
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn box_half(&self) -> f64 {
        self.x0.abs().max(self.x_at(self.values.len() - 1).abs())
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.dx * self.values.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn mass_in_window(&self, window: f64) -> f64 {
        self.dx
            * self
                .values
                .iter()
                .enumerate()
                .filter(|(i, _)| self.x_at(*i).abs() <= window)
                .map(|(_, c)| c.norm_sqr())
                .sum::<f64>()
    }

    /// Linear interpolation; zero outside the box.
    pub fn value_at(&self, x: f64) -> Complex64 {
        let s = (x - self.x0) / self.dx;
        if s < 0.0 || s > (self.values.len() - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let frac = s - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Discrete ‖ψ'‖²; bounds the spectral mass above κ by ‖ψ'‖²/κ².
    pub fn gradient_norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.values.windows(2) {
            acc += ((w[1] - w[0]) / self.dx).norm_sqr();
        }
        acc * self.dx
    }
}

/// Propagates i ψ_t = (-d²/dx² + V) ψ with Crank-Nicolson steps of size `dt`,
/// returning snapshots at the requested times (each a multiple of dt). The
/// potential enters through cell averages, which restores second-order
/// convergence across its discontinuities.
pub fn propagate_crank_nicolson(
    psi0: &GridWave,
    v: &PiecewisePotential,
    times: &[f64],
    dt: f64,
) -> Result<Vec<GridWave>, OracleError> {
    if !(dt > 0.0) || times.is_empty() {
        return Err(OracleError::BadTimes);
    }
    let mut steps = Vec::with_capacity(times.len());
    let mut prev = 0usize;
    for &t in times {
        let n = (t / dt).round();
        if ((n * dt - t).abs() > 1e-9 * t.abs().max(1.0)) || n < 0.0 {
            return Err(OracleError::BadTimes);
        }
        let n = n as usize;
        if n < prev {
            return Err(OracleError::BadTimes);
        }
        steps.push(n);
        prev = n;
    }

    let n = psi0.values.len();
    let h2 = psi0.dx * psi0.dx;
    let half_i_dt = Complex64::new(0.0, 0.5 * dt);
    let off = -half_i_dt / h2;

    // diag_j = 1 + i dt/2 (2/h² + V̄_j)
    let vbar: Vec<f64> = (0..n)
        .map(|j| {
            let x = psi0.x_at(j);
            v.cell_average(x - 0.5 * psi0.dx, x + 0.5 * psi0.dx)
        })
        .collect();
    let diag: Vec<Complex64> = vbar
        .iter()
        .map(|&vj| Complex64::new(1.0, 0.0) + half_i_dt * (2.0 / h2 + vj))
        .collect();

    // Thomas elimination coefficients are step-independent
    let mut cp = vec![Complex64::new(0.0, 0.0); n];
    cp[0] = off / diag[0];
    for j in 1..n {
        cp[j] = off / (diag[j] - off * cp[j - 1]);
    }
    let denom: Vec<Complex64> = (0..n)
        .map(|j| if j == 0 { diag[0] } else { diag[j] - off * cp[j - 1] })
        .collect();

    let mut psi = psi0.values.clone();
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(times.len());
    let mut step = 0usize;
    for (&target, _t) in steps.iter().zip(times.iter()) {
        while step < target {
            // rhs = (I - i dt/2 H) psi, Dirichlet walls
            for j in 0..n {
                let lap = if j == 0 {
                    psi[1]
                } else if j == n - 1 {
                    psi[n - 2]
                } else {
                    psi[j - 1] + psi[j + 1]
                };
                rhs[j] = (Complex64::new(2.0, 0.0) - diag[j]) * psi[j] - off * lap;
            }
            // Thomas solve (I + i dt/2 H) psi_new = rhs
            psi[0] = rhs[0] / denom[0];
            for j in 1..n {
                psi[j] = (rhs[j] - off * psi[j - 1]) / denom[j];
            }
            for j in (0..n - 1).rev() {
                let correction = cp[j] * psi[j + 1];
                psi[j] -= correction;
            }
            step += 1;
        }
        out.push(GridWave { x0: psi0.x0, dx: psi0.dx, values: psi.clone() });
    }
    Ok(out)
}

/// Flags each snapshot from the first time the outer half of the margin
/// between the window and the walls holds more than `threshold` mass: from
/// then on, wall reflections may re-enter the window.
pub fn box_violation_flags(snapshots: &[GridWave], window: f64, threshold: f64) -> Vec<bool> {
    let mut contaminated = false;
    snapshots
        .iter()
        .map(|snap| {
            let band_lo = 0.5 * (window + snap.box_half());
            let band_mass: f64 = snap.dx
                * snap
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| snap.x_at(*i).abs() >= band_lo)
                    .map(|(_, c)| c.norm_sqr())
                    .sum::<f64>();
            if band_mass > threshold {
                contaminated = true;
            }
            contaminated
        })
        .collect()
}

/// Per-time relative L² difference between the spectral evolution and grid
/// snapshots, over the spectral result's x-grid restricted to the window.
pub fn compare(
    spectral: &EvolutionResult,
    grid: &[GridWave],
    window: f64,
) -> Result<Vec<(f64, f64)>, OracleError> {
    if spectral.times.len() != grid.len() {
        return Err(OracleError::Misaligned);
    }
    let xs: Vec<f64> = spectral.x_grid.iter().copied().filter(|x| x.abs() <= window).collect();
    if xs.len() < 4 {
        return Err(OracleError::Misaligned);
    }
    let mut out = Vec::with_capacity(grid.len());
    for (ti, gw) in grid.iter().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, &x) in spectral.x_grid.iter().enumerate() {
            if x.abs() > window {
                continue;
            }
            let a = spectral.profiles[ti][xi];
            let b = gw.value_at(x);
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        out.push((spectral.times[ti], (num / den.max(1e-300)).sqrt()));
    }
    Ok(out)
}

/// Closed-form free evolution of a Gaussian packet
/// ψ₀ = (2πσ²)^{-1/4} exp(-(x-x0)²/(4σ²) + i k0 (x-x0)) under H = -d²/dx².
pub fn free_gaussian(t: f64, x: f64, x0: f64, k0: f64, sigma: f64) -> Complex64 {
    let a = 1.0 / (4.0 * sigma * sigma);
    let beta = Complex64::new(1.0, 4.0 * a * t);
    let xc = x0 + 2.0 * k0 * t;
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
    // Galilean boost of the spreading packet: group velocity 2 k0
    let phase = (Complex64::i() * (k0 * (x - xc) + k0 * k0 * t)).exp();
    norm / beta.sqrt() * phase * (-(a * (x - xc) * (x - xc)) / beta).exp()
}
