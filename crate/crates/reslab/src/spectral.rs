//! Expansion of square-integrable states in the normalized generalized
//! eigenfunctions u±, and the exact spectral time evolution
//! ψ(t,x) = ∫ (ψ̂₊ u₊ + ψ̂₋ u₋) e^{-ik²t} dk.
//!
//! The k-integrals are carried in the spectral variable ε = k² on graded
//! Gauss-Legendre panels (dense around each tracked Breit-Wigner peak,
//! geometric toward ε = 0), and the oscillatory phase e^{-iεt} is integrated
//! exactly per panel by the Filon rule in `quadrature`, so accuracy does not
//! degrade with t.

use num_complex::Complex64;
use rug::Float;
use thiserror::Error;

use crate::cpx::{ComplexField, MpComplex};
use crate::potential::PiecewisePotential;
use crate::quadrature::{
    filon_panel, gl15_points, legendre_coefficients, legendre_values, panels_with_kinks,
};
use crate::resonance::{Resonance, TruncatedGamow};
use crate::scattering::{
    bound_state_diagnostic, solve_scattering, ScatteringError, ScatteringSolution, SQRT_2PI,
};
use crate::threads::par_map;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("Parseval defect {defect:.3e} did not reach tolerance {tol:.3e} at the truncation")]
    Truncation { defect: f64, tol: f64 },
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("invalid input: {0}")]
    BadInput(&'static str),
}

/// A complex-valued state of compact support, evaluable pointwise.
pub trait WaveFunction {
    fn eval(&self, x: f64) -> Complex64;
    /// Closed interval outside which the function vanishes.
    fn support(&self) -> (f64, f64);
    /// Points where the function or its derivatives jump (quadrature panels
    /// never straddle these).
    fn kinks(&self) -> Vec<f64> {
        vec![]
    }
}

impl WaveFunction for TruncatedGamow {
    fn eval(&self, x: f64) -> Complex64 {
        TruncatedGamow::eval(self, x)
    }
    fn support(&self) -> (f64, f64) {
        (-self.half_width(), self.half_width())
    }
    fn kinks(&self) -> Vec<f64> {
        let w = self.half_width();
        let mut ks = vec![-w, w];
        ks.extend(self.gamow().breakpoints().iter().copied().filter(|b| b.abs() < w));
        ks
    }
}

/// Samples on a uniform grid with local quadratic interpolation in between.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    x0: f64,
    dx: f64,
    values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(x0: f64, dx: f64, values: Vec<Complex64>) -> Result<Self, SpectralError> {
        if !(dx > 0.0) || values.len() < 3 {
            return Err(SpectralError::BadInput("need dx > 0 and at least 3 samples"));
        }
        Ok(SampledFunction { x0, dx, values })
    }

    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        let dx = (hi - lo) / (n - 1) as f64;
        let values = (0..n).map(|i| f(lo + dx * i as f64)).collect();
        SampledFunction { x0: lo, dx, values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x0 + self.dx * i as f64
    }
}

impl WaveFunction for SampledFunction {
    fn eval(&self, x: f64) -> Complex64 {
        let n = self.values.len();
        let hi = self.x0 + self.dx * (n - 1) as f64;
        if x < self.x0 || x > hi {
            return Complex64::new(0.0, 0.0);
        }
        let center = (((x - self.x0) / self.dx).round() as usize).clamp(1, n - 2);
        let xc = self.x_at(center);
        let s = (x - xc) / self.dx;
        // Lagrange through (x_{c-1}, x_c, x_{c+1})
        let w_m = 0.5 * s * (s - 1.0);
        let w_0 = (1.0 - s) * (1.0 + s);
        let w_p = 0.5 * s * (s + 1.0);
        self.values[center - 1] * w_m + self.values[center] * w_0 + self.values[center + 1] * w_p
    }

    fn support(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.dx * (self.values.len() - 1) as f64)
    }

    fn kinks(&self) -> Vec<f64> {
        let (lo, hi) = WaveFunction::support(self);
        vec![lo, hi]
    }
}

/// A closure-backed state, evaluable exactly; preferred over sampling when an
/// analytic form exists (sampled inputs cap the reachable Parseval tolerance
/// at their interpolation error).
pub struct FnWave<F: Fn(f64) -> Complex64> {
    f: F,
    lo: f64,
    hi: f64,
    kinks: Vec<f64>,
}

impl<F: Fn(f64) -> Complex64> FnWave<F> {
    pub fn new(lo: f64, hi: f64, kinks: Vec<f64>, f: F) -> Self {
        FnWave { f, lo, hi, kinks }
    }
}

impl<F: Fn(f64) -> Complex64> WaveFunction for FnWave<F> {
    fn eval(&self, x: f64) -> Complex64 {
        if x < self.lo || x > self.hi {
            Complex64::new(0.0, 0.0)
        } else {
            (self.f)(x)
        }
    }
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
    fn kinks(&self) -> Vec<f64> {
        let mut ks = vec![self.lo, self.hi];
        ks.extend_from_slice(&self.kinks);
        ks
    }
}

/// Breit-Wigner peak the k-grid must resolve: center ε = k_res², half-width Γ.
#[derive(Debug, Clone, Copy)]
pub struct TrackedPeak {
    pub k_res: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct TransformOptions {
    pub k_min: f64,
    pub k_max: f64,
    /// Relative Parseval tolerance.
    pub tol: f64,
    pub tracked: Vec<TrackedPeak>,
    /// Largest |x| the stored grid must support in later evaluations
    /// (oscillation budget of the panels); defaults to twice the support.
    pub x_extent: Option<f64>,
    pub max_refine_rounds: usize,
    /// Extend k_max (up to 8x) when the Parseval defect is dominated by the tail.
    pub auto_extend: bool,
}

impl TransformOptions {
    pub fn new(k_max: f64, tol: f64) -> Self {
        TransformOptions {
            // low enough that even states with ψ̂±(0) ≠ 0 (free potential:
            // no 1/a suppression at k → 0) lose only O(k_min) mass
            k_min: 1e-9,
            k_max,
            tol,
            tracked: Vec::new(),
            x_extent: None,
            max_refine_rounds: 3,
            auto_extend: true,
        }
    }

    /// Default truncation for a set of resonances: the largest
    /// Re z + max(40 Γ/(2√E), 10), with the peaks tracked for grid refinement.
    pub fn for_resonances(resonances: &[Resonance], tol: f64) -> Self {
        let mut k_max = 10.0_f64;
        let mut tracked = Vec::new();
        for r in resonances {
            let half_width_k = r.gamma / (2.0 * r.energy.sqrt());
            k_max = k_max.max(r.z.re + (40.0 * half_width_k).max(10.0));
            tracked.push(TrackedPeak { k_res: r.z.re, gamma: r.gamma });
        }
        let mut o = TransformOptions::new(k_max, tol);
        o.tracked = tracked;
        o
    }

    pub fn with_tracked(mut self, tracked: Vec<TrackedPeak>) -> Self {
        self.tracked = tracked;
        self
    }
}

/// One ε-panel of the spectral grid with ψ̂± at its GL15 nodes.
#[derive(Debug, Clone)]
pub struct SpectralPanel {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub psi_hat_plus: [Complex64; 15],
    pub psi_hat_minus: [Complex64; 15],
}

impl SpectralPanel {
    pub fn eps_nodes(&self) -> [(f64, f64); 15] {
        gl15_points(self.eps_lo, self.eps_hi)
    }

    pub fn k_nodes(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        for (i, (e, _)) in self.eps_nodes().iter().enumerate() {
            out[i] = e.sqrt();
        }
        out
    }

    /// |ψ̂₊|² + |ψ̂₋|² against dk, as GL15 values in ε.
    fn density_values(&self) -> [Complex64; 15] {
        let mut out = [Complex64::new(0.0, 0.0); 15];
        for (i, (e, _)) in self.eps_nodes().iter().enumerate() {
            let rho = self.psi_hat_plus[i].norm_sqr() + self.psi_hat_minus[i].norm_sqr();
            out[i] = Complex64::new(rho / (2.0 * e.sqrt()), 0.0);
        }
        out
    }
}

/// ψ̂± sampled on the adaptive ε-grid; the input to evolution and survival.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    pub(crate) panels: Vec<SpectralPanel>,
    psi_norm_sqr: f64,
    parseval_defect: f64,
    tracked: Vec<TrackedPeak>,
    bound_state_warning: bool,
}

impl SpectralCoefficients {
    pub fn panels(&self) -> &[SpectralPanel] {
        &self.panels
    }

    pub fn tracked(&self) -> &[TrackedPeak] {
        &self.tracked
    }

    pub fn psi_norm_sqr(&self) -> f64 {
        self.psi_norm_sqr
    }

    pub fn parseval_defect(&self) -> f64 {
        self.parseval_defect
    }

    /// Set when the potential's bound-state diagnostic fired; the expansion
    /// misses the bound-state sum in that case.
    pub fn bound_state_warning(&self) -> bool {
        self.bound_state_warning
    }

    pub fn k_max(&self) -> f64 {
        self.panels.last().map(|p| p.eps_hi.sqrt()).unwrap_or(0.0)
    }

    /// ∫ (|ψ̂₊|² + |ψ̂₋|²) dk over the stored grid.
    pub fn total_mass(&self) -> f64 {
        let mut total = 0.0;
        for p in &self.panels {
            for (i, (e, w)) in p.eps_nodes().iter().enumerate() {
                let rho = p.psi_hat_plus[i].norm_sqr() + p.psi_hat_minus[i].norm_sqr();
                total += w * rho / (2.0 * e.sqrt());
            }
        }
        total
    }

    /// ψ̂±(k) by Legendre evaluation of the panel interpolant containing k².
    pub fn psi_hat_at(&self, k: f64) -> Option<(Complex64, Complex64)> {
        let eps = k * k;
        let idx = self.panels.partition_point(|p| p.eps_hi < eps);
        let p = self.panels.get(idx)?;
        if eps < p.eps_lo - 1e-12 {
            return None;
        }
        let u = (2.0 * eps - p.eps_lo - p.eps_hi) / (p.eps_hi - p.eps_lo);
        let pl = legendre_values(u.clamp(-1.0, 1.0));
        let cp = legendre_coefficients(&p.psi_hat_plus);
        let cm = legendre_coefficients(&p.psi_hat_minus);
        let mut vp = Complex64::new(0.0, 0.0);
        let mut vm = Complex64::new(0.0, 0.0);
        for n in 0..15 {
            vp += cp[n] * pl[n];
            vm += cm[n] * pl[n];
        }
        Some((vp, vm))
    }

    /// Multiplies ψ̂± by a C¹ cos⁴ window equal to 1 below `k_start` and 0 at
    /// the truncation edge. A state rolled off this way is smooth in k, so
    /// its position-space tails decay fast — useful when the same state must
    /// be handed to a finite-box propagator.
    pub fn apply_band_rolloff(&mut self, k_start: f64) {
        let k_end = self.k_max();
        if !(k_end > k_start) {
            return;
        }
        for p in self.panels.iter_mut() {
            let ks = p.k_nodes();
            for i in 0..15 {
                let k = ks[i];
                if k <= k_start {
                    continue;
                }
                let s = ((k - k_start) / (k_end - k_start)).min(1.0);
                let w = (std::f64::consts::FRAC_PI_2 * s).cos().powi(4);
                p.psi_hat_plus[i] *= w;
                p.psi_hat_minus[i] *= w;
            }
        }
    }

    /// (k, ψ̂₊, ψ̂₋) at every stored node, in increasing k.
    pub fn nodes(&self) -> Vec<(f64, Complex64, Complex64)> {
        let mut out = Vec::new();
        for p in &self.panels {
            for (i, k) in p.k_nodes().iter().enumerate() {
                out.push((*k, p.psi_hat_plus[i], p.psi_hat_minus[i]));
            }
        }
        out
    }
}

/// x-quadrature rule (node, weight, ψ(node)) covering the support.
fn x_rule(psi: &dyn WaveFunction, k_max: f64) -> Vec<(f64, f64, Complex64)> {
    let (lo, hi) = psi.support();
    let max_w = (8.0 / k_max.max(1.0)).min((hi - lo) / 2.0);
    let mut rule = Vec::new();
    for (a, b) in panels_with_kinks(lo, hi, &psi.kinks(), max_w) {
        for (x, w) in gl15_points(a, b) {
            rule.push((x, w, psi.eval(x)));
        }
    }
    rule
}

/// Graded ε-panel layout for the requested truncation and tracked peaks.
fn build_panel_bounds(opts: &TransformOptions, x_extent: f64) -> Vec<(f64, f64)> {
    let eps_min = opts.k_min * opts.k_min;
    let eps_max = opts.k_max * opts.k_max;
    let mut cuts: Vec<f64> = vec![eps_min, eps_max];

    // geometric grading toward ε = 0 (the 1/(2√ε) measure and the k→0
    // behavior of u± are smooth on [a, 2a] panels)
    let mut e = eps_min;
    while e < eps_max.min(4.0) {
        cuts.push(e);
        e *= 2.0;
    }

    // dense core plus geometric shoulders around each Breit-Wigner peak
    for peak in &opts.tracked {
        let center = peak.k_res * peak.k_res;
        let hw = peak.gamma.max(1e-300);
        if center < eps_min || center > eps_max {
            continue;
        }
        for j in -8..=8 {
            let c = center + 0.5 * hw * j as f64;
            if c > eps_min && c < eps_max {
                cuts.push(c);
            }
        }
        let mut w = 4.0 * hw;
        while w < 0.5 * center.max(1.0) {
            for s in [-1.0, 1.0] {
                let c = center + s * w;
                if c > eps_min && c < eps_max {
                    cuts.push(c);
                }
            }
            w *= 2.0;
        }
    }

    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));

    // oscillation budget: |x_extent| Δk ≲ 5 per panel
    let mut panels = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let max_width = (10.0 * a.max(eps_min).sqrt() / x_extent.max(1.0)).max(1e-12);
        let n = ((b - a) / max_width).ceil().max(1.0) as usize;
        for i in 0..n {
            panels.push((a + (b - a) * i as f64 / n as f64, a + (b - a) * (i + 1) as f64 / n as f64));
        }
    }
    panels
}

fn transform_panel(
    v: &PiecewisePotential,
    bounds: (f64, f64),
    rule: &[(f64, f64, Complex64)],
) -> Result<SpectralPanel, ScatteringError> {
    let mut panel = SpectralPanel {
        eps_lo: bounds.0,
        eps_hi: bounds.1,
        psi_hat_plus: [Complex64::new(0.0, 0.0); 15],
        psi_hat_minus: [Complex64::new(0.0, 0.0); 15],
    };
    for (i, (eps, _)) in panel.eps_nodes().iter().enumerate() {
        let k = eps.sqrt();
        let sol = solve_scattering(v, &Complex64::new(k, 0.0))?;
        let norm = sol.a() * SQRT_2PI;
        let mut acc_p = Complex64::new(0.0, 0.0);
        let mut acc_m = Complex64::new(0.0, 0.0);
        for &(x, w, psi_x) in rule {
            // conj(u±) at real k
            acc_p += psi_x * (sol.f_plus(x) / norm).conj() * w;
            acc_m += psi_x * (sol.f_minus(x) / norm).conj() * w;
        }
        panel.psi_hat_plus[i] = acc_p;
        panel.psi_hat_minus[i] = acc_m;
    }
    Ok(panel)
}

/// ψ̂±(k) = ∫ ψ(x) conj(u±(k,x)) dx on an adaptive ε-grid, refined until the
/// Parseval defect |∫(|ψ̂₊|²+|ψ̂₋|²)dk - ‖ψ‖²| / ‖ψ‖² is below `opts.tol`.
pub fn forward_transform(
    psi: &dyn WaveFunction,
    v: &PiecewisePotential,
    opts: &TransformOptions,
) -> Result<SpectralCoefficients, SpectralError> {
    let (lo, hi) = psi.support();
    if !(hi > lo) {
        return Err(SpectralError::BadInput("empty support"));
    }
    let bound_state_warning = bound_state_diagnostic(v);
    let x_extent = opts
        .x_extent
        .unwrap_or_else(|| 2.0 * lo.abs().max(hi.abs()) + 2.0 * v.half_support() + 2.0);

    // narrow resonances concentrate most of a well-localized state's spectral
    // mass in peaks far below any reasonable base panel width; locate them if
    // the caller did not
    let mut opts = opts.clone();
    if opts.tracked.is_empty() && !v.heights().is_empty() {
        let search = crate::resonance::ResonanceSearch {
            scan_points: ((opts.k_max * 400.0) as usize).clamp(2000, 40000),
            max_iter: 60,
        };
        if let Ok(out) = crate::resonance::find_resonances_detailed(
            v,
            (0.05, opts.k_max),
            2.0,
            crate::cpx::Precision::Double,
            &search,
        ) {
            opts.tracked = out
                .resonances
                .iter()
                .map(|r| TrackedPeak { k_res: r.z.re, gamma: r.gamma })
                .collect();
        }
    }
    let opts = &opts;

    let mut k_cur = opts.k_max;
    let rule = x_rule(psi, k_cur);
    let psi_norm_sqr: f64 = rule.iter().map(|&(_, w, p)| w * p.norm_sqr()).sum();
    if psi_norm_sqr <= 0.0 {
        return Err(SpectralError::BadInput("zero norm"));
    }
    let bounds = build_panel_bounds(opts, x_extent);
    let mut panels: Vec<SpectralPanel> =
        par_map(bounds.len(), |i| transform_panel(v, bounds[i], &rule))
            .into_iter()
            .collect::<Result<_, _>>()?;
    drop(rule);

    let mut rounds = 0;
    let mut extensions = 0;
    loop {
        let coeffs = SpectralCoefficients {
            panels,
            psi_norm_sqr,
            parseval_defect: 0.0,
            tracked: opts.tracked.clone(),
            bound_state_warning,
        };
        let defect = (coeffs.total_mass() - psi_norm_sqr).abs() / psi_norm_sqr;
        if defect <= opts.tol {
            return Ok(SpectralCoefficients { parseval_defect: defect, ..coeffs });
        }
        panels = coeffs.panels;

        // mass in the top quarter of the ε-range estimates the truncation
        // tail (for the 1/k² densities of truncated states it equals it)
        let eps_top = panels.last().map(|p| p.eps_hi).unwrap_or(0.0);
        let m_top: f64 = panels
            .iter()
            .filter(|p| p.eps_lo >= 0.25 * eps_top)
            .flat_map(|p| {
                p.eps_nodes().into_iter().enumerate().map(|(i, (e, w))| {
                    w * (p.psi_hat_plus[i].norm_sqr() + p.psi_hat_minus[i].norm_sqr())
                        / (2.0 * e.sqrt())
                })
            })
            .sum();
        let tail_dominated = m_top > 0.5 * defect * psi_norm_sqr;

        if tail_dominated && opts.auto_extend && extensions < 7 && k_cur < 16.0 * opts.k_max {
            // grow the grid upward; panels already computed stay valid
            let k_new = k_cur * 1.6;
            let new_rule = x_rule(psi, k_new);
            let mut new_bounds = Vec::new();
            let mut lo = eps_top;
            let hi = k_new * k_new;
            while lo < hi {
                let width = (10.0 * lo.sqrt() / x_extent.max(1.0)).max(1e-12);
                let next = (lo + width).min(hi);
                new_bounds.push((lo, next));
                lo = next;
            }
            let fresh: Vec<SpectralPanel> =
                par_map(new_bounds.len(), |i| transform_panel(v, new_bounds[i], &new_rule))
                    .into_iter()
                    .collect::<Result<_, _>>()?;
            panels.extend(fresh);
            k_cur = k_new;
            extensions += 1;
            continue;
        }

        if rounds < opts.max_refine_rounds {
            // split panels whose estimated quadrature error is a real share
            // of the defect budget (Legendre tail × width is an
            // integral-error proxy; noise-floor panels stay put)
            let rule = x_rule(psi, k_cur);
            let err_budget = 0.1 * opts.tol * psi_norm_sqr / panels.len() as f64;
            let mut split_jobs: Vec<(f64, f64)> = Vec::new();
            let mut keep: Vec<SpectralPanel> = Vec::new();
            for p in panels.into_iter() {
                let c = legendre_coefficients(&p.density_values());
                let err_est = (c[13].norm() + c[14].norm()) * (p.eps_hi - p.eps_lo);
                if err_est > err_budget && split_jobs.len() < 512 {
                    let mid = 0.5 * (p.eps_lo + p.eps_hi);
                    split_jobs.push((p.eps_lo, mid));
                    split_jobs.push((mid, p.eps_hi));
                } else {
                    keep.push(p);
                }
            }
            if !split_jobs.is_empty() {
                let fresh: Vec<SpectralPanel> =
                    par_map(split_jobs.len(), |i| transform_panel(v, split_jobs[i], &rule))
                        .into_iter()
                        .collect::<Result<_, _>>()?;
                keep.extend(fresh);
                keep.sort_by(|a, b| a.eps_lo.partial_cmp(&b.eps_lo).unwrap());
                panels = keep;
                rounds += 1;
                continue;
            }
        }

        return Err(SpectralError::Truncation { defect, tol: opts.tol });
    }
}

/// ψ(x) = ∫ (ψ̂₊ u₊ + ψ̂₋ u₋) dk over the stored grid.
pub fn inverse_transform(
    coeffs: &SpectralCoefficients,
    v: &PiecewisePotential,
    xs: &[f64],
) -> Result<Vec<Complex64>, SpectralError> {
    let mut out = vec![Complex64::new(0.0, 0.0); xs.len()];
    for p in &coeffs.panels {
        for (i, (eps, w)) in p.eps_nodes().iter().enumerate() {
            let k = eps.sqrt();
            let sol = solve_scattering(v, &Complex64::new(k, 0.0))?;
            let norm = sol.a() * SQRT_2PI;
            let measure = w / (2.0 * k);
            for (xi, &x) in xs.iter().enumerate() {
                let u_p = sol.f_plus(x) / norm;
                let u_m = sol.f_minus(x) / norm;
                out[xi] += (p.psi_hat_plus[i] * u_p + p.psi_hat_minus[i] * u_m) * measure;
            }
        }
    }
    Ok(out)
}

/// Evolution output on a window [-W, W].
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// ψ(t, x) indexed [time][x].
    pub profiles: Vec<Vec<Complex64>>,
    /// ⟨ψ₀, ψ(t)⟩ = ∫ (|ψ̂₊|² + |ψ̂₋|²) e^{-ik²t} dk.
    pub survival_amplitude: Vec<Complex64>,
    /// ∫_{-W}^{W} |ψ(t,x)|² dx.
    pub window_mass: Vec<f64>,
    /// s(0): the total spectral mass (= ‖ψ‖² up to the Parseval defect).
    pub total_mass: f64,
    pub window: f64,
    /// Per-time quadrature health; false marks a time whose panel expansion
    /// no longer resolves the integrand.
    pub reliable: Vec<bool>,
}

impl EvolutionResult {
    /// P(t) = |⟨ψ, e^{-iHt} ψ⟩|² for the normalized state.
    pub fn survival_probability(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(self.survival_amplitude.iter())
            .map(|(&t, s)| (t, s.norm_sqr() / (self.total_mass * self.total_mass)))
            .collect()
    }
}

/// Survival amplitudes alone (no spatial profiles); cheap at any t.
pub fn survival_amplitudes(coeffs: &SpectralCoefficients, times: &[f64]) -> Vec<Complex64> {
    times
        .iter()
        .map(|&t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in &coeffs.panels {
                acc += filon_panel(p.eps_lo, p.eps_hi, &p.density_values(), t);
            }
            acc
        })
        .collect()
}

/// Exact spectral evolution at the requested times, evaluated on `x_out`
/// (all inside the window) plus an internal window-mass quadrature.
pub fn evolve(
    coeffs: &SpectralCoefficients,
    v: &PiecewisePotential,
    times: &[f64],
    window: f64,
    x_out: &[f64],
) -> Result<EvolutionResult, SpectralError> {
    if !(window > 0.0) {
        return Err(SpectralError::BadInput("window must be positive"));
    }
    if x_out.iter().any(|x| x.abs() > window * (1.0 + 1e-12)) {
        return Err(SpectralError::BadInput("output grid outside the window"));
    }
    let k_max = coeffs.k_max();

    // window-mass quadrature nodes
    let max_w = (4.0 / k_max.max(1.0)).min(window / 2.0);
    let mass_rule: Vec<(f64, f64)> = panels_with_kinks(-window, window, v.breakpoints(), max_w)
        .into_iter()
        .flat_map(|(a, b)| gl15_points(a, b).to_vec())
        .collect();

    let x_all: Vec<f64> = x_out.iter().copied().chain(mass_rule.iter().map(|&(x, _)| x)).collect();
    let n_out = x_out.len();

    // solutions at every stored node, shared across x and t
    let sols: Vec<Vec<ScatteringSolution<Complex64>>> = par_map(coeffs.panels.len(), |pi| {
        coeffs.panels[pi]
            .k_nodes()
            .iter()
            .map(|&k| solve_scattering(v, &Complex64::new(k, 0.0)))
            .collect::<Result<Vec<_>, _>>()
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    // per x: Legendre coefficients of H_x(ε) per panel, then Filon over t
    let columns: Vec<Vec<Complex64>> = par_map(x_all.len(), |xi| {
        let x = x_all[xi];
        let mut vals = [Complex64::new(0.0, 0.0); 15];
        let mut acc = vec![Complex64::new(0.0, 0.0); times.len()];
        for (pi, p) in coeffs.panels.iter().enumerate() {
            for (i, (eps, _)) in p.eps_nodes().iter().enumerate() {
                let k = eps.sqrt();
                let sol = &sols[pi][i];
                let norm = sol.a() * SQRT_2PI;
                let h = (p.psi_hat_plus[i] * (sol.f_plus(x) / norm)
                    + p.psi_hat_minus[i] * (sol.f_minus(x) / norm))
                    / (2.0 * k);
                vals[i] = h;
            }
            for (ti, &t) in times.iter().enumerate() {
                acc[ti] += filon_panel(p.eps_lo, p.eps_hi, &vals, t);
            }
        }
        acc
    });

    let profiles: Vec<Vec<Complex64>> = (0..times.len())
        .map(|ti| (0..n_out).map(|xi| columns[xi][ti]).collect())
        .collect();
    let window_mass: Vec<f64> = (0..times.len())
        .map(|ti| {
            mass_rule
                .iter()
                .enumerate()
                .map(|(mi, &(_, w))| w * columns[n_out + mi][ti].norm_sqr())
                .sum()
        })
        .collect();

    let survival_amplitude = survival_amplitudes(coeffs, times);
    let total_mass = coeffs.total_mass();

    // reliability: Legendre tail of the survival integrand, weighted by the
    // moment bound 2 (phase factors never amplify a panel)
    let mut tail_budget = 0.0;
    for p in &coeffs.panels {
        let c = legendre_coefficients(&p.density_values());
        tail_budget += (c[13].norm() + c[14].norm()) * (p.eps_hi - p.eps_lo);
    }
    let reliable: Vec<bool> = times.iter().map(|_| tail_budget <= 1e-5 * total_mass).collect();

    Ok(EvolutionResult {
        times: times.to_vec(),
        x_grid: x_out.to_vec(),
        profiles,
        survival_amplitude,
        window_mass,
        total_mass,
        window,
        reliable,
    })
}

/// Breit-Wigner pole model: amplitude(t) = coeff · e^{-iEt - Γt}.
#[derive(Debug, Clone)]
pub struct PoleApproximation {
    pub energy: f64,
    pub gamma: f64,
    pub coeff: Complex64,
}

impl PoleApproximation {
    /// Assembled from the frozen spectral factors |f̃(±√E)|²/(2√E) and the
    /// Lorentzian Fourier integral (π/Γ).
    pub fn from_tilde_f(r: &Resonance, tilde_f: (Complex64, Complex64)) -> Self {
        let e = r.energy;
        let coeff = std::f64::consts::PI / r.gamma * (tilde_f.0.norm_sqr() + tilde_f.1.norm_sqr())
            / (2.0 * e.sqrt());
        PoleApproximation { energy: e, gamma: r.gamma, coeff: Complex64::new(coeff, 0.0) }
    }

    /// Coefficient calibrated against one exact amplitude.
    pub fn calibrated(r: &Resonance, reference: Complex64, t_ref: f64) -> Self {
        let phase = (Complex64::new(-r.gamma, -r.energy) * t_ref).exp();
        PoleApproximation { energy: r.energy, gamma: r.gamma, coeff: reference / phase }
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        self.coeff * (Complex64::new(-self.gamma, -self.energy) * t).exp()
    }

    /// The pole model presumes Γ ≪ E.
    pub fn is_narrow(&self) -> bool {
        self.gamma < 0.1 * self.energy
    }
}

/// L¹ masses of the resonant principal part η(k)G(x) and of the remainder of
/// u± - ηG in the evolution integrand, over a k-interval.
#[derive(Debug, Clone, Copy)]
pub struct LaurentSplit {
    pub principal_mass: f64,
    pub remainder_mass: f64,
}

pub fn laurent_split_diagnostic(
    coeffs: &SpectralCoefficients,
    v: &PiecewisePotential,
    r: &Resonance,
    g: &crate::resonance::GamowFunction,
    interval: (f64, f64),
    window: f64,
) -> Result<LaurentSplit, SpectralError> {
    if !(interval.1 > interval.0) || !(window > 0.0) {
        return Err(SpectralError::BadInput("bad interval or window"));
    }
    let k_max = coeffs.k_max();
    let max_w = (4.0 / k_max.max(1.0)).min(window / 2.0);
    let x_rule: Vec<(f64, f64)> = panels_with_kinks(-window, window, v.breakpoints(), max_w)
        .into_iter()
        .flat_map(|(a, b)| gl15_points(a, b).to_vec())
        .collect();
    let g_norm = g.norm_sqr_on(window).sqrt();

    let mut principal = 0.0;
    let mut remainder = 0.0;
    for p in &coeffs.panels {
        for (i, (eps, w)) in p.eps_nodes().iter().enumerate() {
            let k = eps.sqrt();
            if k < interval.0 || k > interval.1 {
                continue;
            }
            let measure = w / (2.0 * k);
            let eta = r.residue_scale / (Complex64::new(k, 0.0) - r.z);
            let p_coeff = (p.psi_hat_plus[i] + p.psi_hat_minus[i]) * eta;
            principal += p_coeff.norm() * g_norm * measure;

            let sol = solve_scattering(v, &Complex64::new(k, 0.0))?;
            let norm = sol.a() * SQRT_2PI;
            let mut rem_sq = 0.0;
            for &(x, wx) in &x_rule {
                let u_p = sol.f_plus(x) / norm;
                let u_m = sol.f_minus(x) / norm;
                let gx = g.eval(x);
                let term = p.psi_hat_plus[i] * (u_p - eta * gx) + p.psi_hat_minus[i] * (u_m - eta * gx);
                rem_sq += wx * term.norm_sqr();
            }
            remainder += rem_sq.sqrt() * measure;
        }
    }
    Ok(LaurentSplit { principal_mass: principal, remainder_mass: remainder })
}

/// ψ̂₊(k) at real k, computed at extended precision through the
/// transfer-matrix backend. Resolves line shapes whose width is far below
/// f64 resolution around k.
pub fn transform_plus_at_real_k_mp(
    psi: &dyn WaveFunction,
    v: &PiecewisePotential,
    k: &MpComplex,
) -> Result<MpComplex, SpectralError> {
    let (lo, hi) = psi.support();
    if !(hi > lo) {
        return Err(SpectralError::BadInput("empty support"));
    }
    let k_abs = k.abs_f64();
    let sol = solve_scattering(v, k)?;
    let norm = sol.a().scale(SQRT_2PI);
    let max_w = 6.0 / (k_abs + 1.0).max(1.0);
    let mut acc = k.embed(0.0, 0.0);
    for (a, b) in panels_with_kinks(lo, hi, &psi.kinks(), max_w) {
        for (x, w) in gl15_points(a, b) {
            let p = psi.eval(x);
            let u = sol.f_plus(x) / norm.clone();
            // conj(u₊(k,x)) for real k
            acc = acc + u.conj().scale(w) * k.embed(p.re, p.im);
        }
    }
    Ok(acc)
}

/// Closed-form transform of 1_ℓ (c cos(zx)) against u₊ for the even-channel
/// double well: c/(sqrt(2π) conj(a₂(k))) (sin((k-z)ℓ)/(k-z) + sin((k+z)ℓ)/(k+z)).
pub fn truncated_cos_transform_closed_form(
    c_cos: Complex64,
    z: &MpComplex,
    ell: f64,
    a2_at_k: &MpComplex,
    k: &MpComplex,
) -> MpComplex {
    let half = |sign: f64| -> MpComplex {
        let shift = k.clone() + z.scale(sign);
        shift.scale(ell).sin() / shift
    };
    let c = k.embed(c_cos.re, c_cos.im);
    c * (half(-1.0) + half(1.0)) / a2_at_k.conj().scale(SQRT_2PI)
}

/// Pole model for the transform of ψ near a resonance: the Laurent principal
/// part of ψ̂₊ is conj(c ⟨G, ψ⟩) / (k - conj(z)); `eta_coefficient` returns
/// that constant for a given state.
pub fn eta_coefficient(
    psi: &dyn WaveFunction,
    g: &crate::resonance::GamowFunction,
    r: &Resonance,
) -> Complex64 {
    let (lo, hi) = psi.support();
    let mut overlap = Complex64::new(0.0, 0.0);
    for (a, b) in panels_with_kinks(lo, hi, &psi.kinks(), 0.5 / (1.0 + g.z().norm())) {
        for (x, w) in gl15_points(a, b) {
            overlap += psi.eval(x) * g.eval(x).conj() * w;
        }
    }
    (r.residue_scale * overlap).conj()
}

/// |η̄(k)| = |c_eta| / |k - conj(z)| at real k, in extended precision.
pub fn eta_bar_abs_at(c_eta: Complex64, z: &MpComplex, k: &MpComplex) -> f64 {
    let dist = (k.clone() - z.conj()).abs_f64();
    c_eta.norm() / dist
}

/// One-sided second-order estimate of dP/dt at t = 0 from forward samples;
/// exact for even P (P(h) and P(2h) carry no linear term).
pub fn survival_derivative_at_zero(coeffs: &SpectralCoefficients, h: f64) -> f64 {
    let amps = survival_amplitudes(coeffs, &[h, 2.0 * h]);
    let m = coeffs.total_mass();
    let p1 = amps[0].norm_sqr() / (m * m);
    let p2 = amps[1].norm_sqr() / (m * m);
    (4.0 * p1 - p2 - 3.0) / (2.0 * h)
}

/// Real-k offsets around a resonance in exact extended-precision arithmetic:
/// k_j = Re z + offsets[j] · |Im z|.
pub fn k_points_near_resonance(z: &MpComplex, offsets: &[f64]) -> Vec<MpComplex> {
    offsets
        .iter()
        .map(|&o| {
            let re = z.re_float() + Float::with_val(z.prec(), o) * z.im_float().clone().abs();
            MpComplex(rug::Complex::with_val(z.prec(), (re, Float::new(z.prec()))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpx::Precision;
    use crate::resonance::{find_resonances, gamow_from_resonance};

    fn bump_fn(x: f64) -> Complex64 {
        // C³ bump with a phase twist, supported on [-0.8, 0.9]
        let s = (x + 0.8) / 1.7;
        let env = (std::f64::consts::PI * s).sin().powi(4);
        Complex64::new(0.0, 1.6 * x).exp() * env
    }

    fn bump() -> FnWave<fn(f64) -> Complex64> {
        FnWave::new(-0.8, 0.9, vec![], bump_fn as fn(f64) -> Complex64)
    }

    #[test]
    fn sampled_function_interpolates_quadratics_exactly() {
        let f = SampledFunction::from_fn(-1.0, 1.0, 21, |x| Complex64::new(x * x, 2.0 * x - 1.0));
        for x in [-0.93, -0.2, 0.0, 0.55, 0.99] {
            let v = f.eval(x);
            assert!((v - Complex64::new(x * x, 2.0 * x - 1.0)).norm() < 1e-14);
        }
        assert_eq!(f.eval(5.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn sampled_pipeline_reaches_its_interpolation_floor() {
        // a sampled state carries O(dx³) information; the Parseval defect
        // settles near that floor rather than at machine precision
        let v = PiecewisePotential::free();
        let psi = SampledFunction::from_fn(-0.8, 0.9, 601, bump_fn);
        let coeffs = forward_transform(&psi, &v, &TransformOptions::new(40.0, 2e-5)).unwrap();
        assert!(coeffs.parseval_defect() < 2e-5);
    }

    #[test]
    fn free_transform_is_fourier_transform() {
        let v = PiecewisePotential::free();
        let psi = bump();
        let coeffs = forward_transform(&psi, &v, &TransformOptions::new(40.0, 1e-8)).unwrap();
        for k in [0.5, 1.6, 3.3] {
            let (got_p, got_m) = coeffs.psi_hat_at(k).unwrap();
            // oracle: dense Simpson quadrature of the plain Fourier integral
            let n = 20000;
            let (lo, hi) = WaveFunction::support(&psi);
            let dx = (hi - lo) / n as f64;
            let mut fwd = Complex64::new(0.0, 0.0);
            let mut bwd = Complex64::new(0.0, 0.0);
            for i in 0..=n {
                let x = lo + dx * i as f64;
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                } * dx
                    / 3.0;
                fwd += psi.eval(x) * (-Complex64::i() * k * x).exp() * w;
                bwd += psi.eval(x) * (Complex64::i() * k * x).exp() * w;
            }
            let expect_p = fwd / SQRT_2PI;
            let expect_m = bwd / SQRT_2PI;
            assert!((got_p - expect_p).norm() < 1e-7, "k={k}: {got_p} vs {expect_p}");
            assert!((got_m - expect_m).norm() < 1e-7);
        }
    }

    #[test]
    fn parseval_and_round_trip_on_free_bump() {
        // the defect floor is the k_min cutoff mass, which lives at
        // x ~ 1/k_min and is invisible on the support; with k_max high
        // enough the high-k tail (the part localized here) is far smaller
        let v = PiecewisePotential::free();
        let psi = bump();
        let coeffs = forward_transform(&psi, &v, &TransformOptions::new(64.0, 1e-9)).unwrap();
        assert!(coeffs.parseval_defect() < 1e-9);
        let xs: Vec<f64> = (0..=160).map(|i| -1.0 + i as f64 * 0.0125).collect();
        let rec = inverse_transform(&coeffs, &v, &xs).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            num += (rec[i] - psi.eval(x)).norm_sqr();
            den += psi.eval(x).norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-6, "round trip error {}", (num / den).sqrt());
    }

    #[test]
    fn round_trip_with_potential() {
        // narrow resonance peaks are located and tracked automatically
        let v = PiecewisePotential::double_well(1.0, 1.0, 30.0).unwrap();
        let psi = bump();
        let coeffs = forward_transform(&psi, &v, &TransformOptions::new(40.0, 1e-10)).unwrap();
        assert!(coeffs.parseval_defect() < 1e-10);
        assert!(!coeffs.bound_state_warning());
        let xs: Vec<f64> = (0..=120).map(|i| -0.9 + i as f64 * 0.015).collect();
        let rec = inverse_transform(&coeffs, &v, &xs).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            num += (rec[i] - psi.eval(x)).norm_sqr();
            den += psi.eval(x).norm_sqr();
        }
        assert!((num / den).sqrt() < 3e-5, "round trip error {}", (num / den).sqrt());
    }

    #[test]
    fn zero_coefficients_give_zero_function() {
        let v = PiecewisePotential::free();
        let mut coeffs = forward_transform(&bump(), &v, &TransformOptions::new(20.0, 1e-6)).unwrap();
        for p in coeffs.panels.iter_mut() {
            p.psi_hat_plus = [Complex64::new(0.0, 0.0); 15];
            p.psi_hat_minus = [Complex64::new(0.0, 0.0); 15];
        }
        let rec = inverse_transform(&coeffs, &v, &[-0.5, 0.0, 0.7]).unwrap();
        assert!(rec.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn evolve_at_zero_time_matches_inverse_transform() {
        let v = PiecewisePotential::double_well(1.0, 0.6, 18.0).unwrap();
        let psi = bump();
        let coeffs = forward_transform(&psi, &v, &TransformOptions::new(25.0, 1e-6)).unwrap();
        let xs: Vec<f64> = (0..=40).map(|i| -1.5 + i as f64 * 0.075).collect();
        let evo = evolve(&coeffs, &v, &[0.0], 1.6, &xs).unwrap();
        let rec = inverse_transform(&coeffs, &v, &xs).unwrap();
        for (a, b) in evo.profiles[0].iter().zip(rec.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
        // survival normalization: P(0) = 1 up to the Parseval defect
        let p0 = evo.survival_probability()[0].1;
        assert!((p0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn evolution_preserves_symmetry() {
        // even initial state on the symmetric double well stays even
        let v = PiecewisePotential::double_well(1.0, 0.6, 18.0).unwrap();
        let psi = SampledFunction::from_fn(-0.9, 0.9, 501, |x| {
            Complex64::new((std::f64::consts::PI * x / 1.8).cos().powi(2), 0.0)
        });
        let coeffs = forward_transform(&psi, &v, &TransformOptions::new(25.0, 1e-6)).unwrap();
        let xs: Vec<f64> = (0..=30).map(|i| -1.5 + i as f64 * 0.1).collect();
        let evo = evolve(&coeffs, &v, &[0.4, 1.3], 1.6, &xs).unwrap();
        for prof in &evo.profiles {
            for i in 0..xs.len() {
                let j = xs.len() - 1 - i;
                assert!((prof[i] - prof[j]).norm() < 1e-6, "asymmetry at {}", xs[i]);
            }
        }
    }

    #[test]
    fn survival_amplitude_time_reversal() {
        let v = PiecewisePotential::free();
        let coeffs = forward_transform(&bump(), &v, &TransformOptions::new(20.0, 1e-6)).unwrap();
        let s = survival_amplitudes(&coeffs, &[0.7, -0.7]);
        assert!((s[0].conj() - s[1]).norm() < 1e-12 * s[0].norm());
    }

    #[test]
    fn pole_approximation_ratio_is_exact_exponential() {
        let r = fake_resonance(2.64, -4e-5);
        let pole = PoleApproximation::from_tilde_f(&r, (Complex64::new(0.4, 0.1), Complex64::new(0.2, -0.3)));
        assert!(pole.is_narrow());
        let t = 37.0;
        let ratio = pole.amplitude(t) / pole.amplitude(0.0);
        let expect = (Complex64::new(-r.gamma, -r.energy) * t).exp();
        assert!((ratio - expect).norm() < 1e-14);
        // Γ -> 0 with E fixed: constant magnitude
        let wide = PoleApproximation { energy: r.energy, gamma: 0.0, coeff: Complex64::new(1.0, 0.0) };
        assert!((wide.amplitude(55.0).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn calibrated_pole_matches_reference_point() {
        let r = fake_resonance(2.64, -4e-5);
        let reference = Complex64::new(0.3, -0.8);
        let pole = PoleApproximation::calibrated(&r, reference, 3.0);
        assert!((pole.amplitude(3.0) - reference).norm() < 1e-13);
    }

    fn fake_resonance(re: f64, im: f64) -> Resonance {
        let z = Complex64::new(re, im);
        Resonance {
            z,
            z_mp: None,
            energy: (z * z).re,
            gamma: -(z * z).im,
            residue_scale: Complex64::new(0.1, 0.02),
            channel: crate::resonance::Channel::None,
            residual: 0.0,
            deriv_abs: 1.0,
            digits: 15,
        }
    }

    #[test]
    fn mp_transform_matches_f64_path_at_moderate_k() {
        let v = PiecewisePotential::double_well(1.0, 1.0, 30.0).unwrap();
        let rs = find_resonances(&v, (1.0, 1.5), 0.1, Precision::Double).unwrap();
        let g = gamow_from_resonance(&v, &rs[0]).unwrap();
        let trunc = g.truncated(1.0);
        let k = 1.31;
        let mp = transform_plus_at_real_k_mp(&trunc, &v, &MpComplex::with_digits(40, k, 0.0)).unwrap();
        // f64 route through the full adaptive transform; the truncation jump
        // limits the reachable Parseval tolerance, not the pointwise accuracy
        let opts = TransformOptions::for_resonances(&rs, 3e-3);
        let coeffs = forward_transform(&trunc, &v, &opts).unwrap();
        let (p, _) = coeffs.psi_hat_at(k).unwrap();
        assert!((mp.to_c64() - p).norm() < 1e-5 * p.norm(), "{} vs {p}", mp.to_c64());
    }

    #[test]
    fn closed_form_transform_matches_quadrature_even_channel() {
        let v = PiecewisePotential::double_well(1.0, 1.0, 30.0).unwrap();
        let rs = find_resonances(&v, (1.2, 1.5), 0.1, Precision::Extended(40)).unwrap();
        let r = &rs[0];
        assert_eq!(r.channel, crate::resonance::Channel::Even);
        let g = gamow_from_resonance(&v, r).unwrap();
        let (c_cos, _) = g.middle_wave_coefficients();
        let trunc = g.truncated(1.0);
        let z = r.z_at_working_precision();
        for offset in [-3.0, 0.5, 8.0] {
            let k = &k_points_near_resonance(&z, &[offset])[0];
            let direct = transform_plus_at_real_k_mp(&trunc, &v, k).unwrap();
            let sol = crate::scattering::closed_form_double_well(1.0, 1.0, 30.0, k).unwrap();
            let (_, a2) = sol.channel_factors().unwrap();
            let closed = truncated_cos_transform_closed_form(c_cos, &z, 1.0, a2, k);
            let rel = (direct.clone() - closed.clone()).abs_f64() / closed.abs_f64();
            assert!(rel < 1e-8, "offset {offset}: rel {rel:e}");
        }
    }

    #[test]
    fn survival_derivative_vanishes_at_zero() {
        let v = PiecewisePotential::double_well(1.0, 1.0, 30.0).unwrap();
        let rs = find_resonances(&v, (2.5, 2.8), 0.1, Precision::Double).unwrap();
        let g = gamow_from_resonance(&v, &rs[0]).unwrap();
        let trunc = g.truncated(1.0);
        let mut opts = TransformOptions::for_resonances(&rs, 3e-3);
        opts.k_max = 60.0;
        let coeffs = forward_transform(&trunc, &v, &opts).unwrap();
        let e = rs[0].energy;
        let dpdt = survival_derivative_at_zero(&coeffs, 1e-4 / e);
        assert!(dpdt.abs() < 1e-3 * e, "dP/dt(0) = {dpdt:e}");
    }
}
