//! Resonance location and Gamow functions.
//!
//! Resonances are the zeros z of a(k) in the lower half-plane, with
//! z² = E - iΓ (E, Γ > 0). They are seeded from local minima of |a(k)| on a
//! real-k scan and refined by damped Newton iteration at the requested working
//! precision; narrow resonances sit exponentially close to the real axis, so
//! the refinement may need far more digits than f64 carries. The residue of
//! u± at z is (up to a constant) the Gamow function, a purely outgoing
//! solution with exponentially growing tails.

use num_complex::Complex64;
use thiserror::Error;

use crate::argprin::{count_zeros_rectangle, ArgPrincipleError, Rectangle};
use crate::cpx::{ComplexField, MpComplex, Precision};
use crate::potential::{PiecewisePotential, Shape};
use crate::quadrature::gl15_integrate_f64;
use crate::scattering::{
    closed_form_double_well, solve_scattering, ScatteringError, ScatteringSolution, SQRT_2PI,
};
use crate::units::UnitScheme;

#[derive(Debug, Error, PartialEq)]
pub enum ResonanceError {
    #[error("window must satisfy 0 < k_lo < k_hi and max_im > 0")]
    BadWindow,
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("z is not an accurate root: |b±(z) - 1| = {defect:.3e} exceeds {tol:.3e}")]
    InconsistentRoot { defect: f64, tol: f64 },
    #[error(transparent)]
    ArgPrinciple(#[from] ArgPrincipleError),
}

/// Which factor of a = a₁ a₂ vanishes at the root (symmetric double well);
/// `None` for potentials without that factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Even,
    Odd,
    None,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Channel::Even => write!(f, "even"),
            Channel::Odd => write!(f, "odd"),
            Channel::None => write!(f, "none"),
        }
    }
}

/// A located root of a(k), with Im z < 0.
#[derive(Debug, Clone)]
pub struct Resonance {
    /// The root (f64 view; see `z_mp` for the full-precision value).
    pub z: Complex64,
    /// Full-precision root when located with the extended backend.
    pub z_mp: Option<MpComplex>,
    /// E = Re z².
    pub energy: f64,
    /// Γ = -Im z² (= -2 Re z Im z exactly).
    pub gamma: f64,
    /// Normalization constant linking the residue of u± at z to the
    /// sup-normalized Gamow function: Res u± = c G.
    pub residue_scale: Complex64,
    pub channel: Channel,
    /// |a(z)| after refinement.
    pub residual: f64,
    /// |a'(z)|, the scale against which the residual is judged.
    pub deriv_abs: f64,
    /// Decimal digits of working precision used.
    pub digits: u32,
}

impl Resonance {
    /// The root at the working precision it was found with.
    pub fn z_at_working_precision(&self) -> MpComplex {
        match &self.z_mp {
            Some(z) => z.clone(),
            None => MpComplex::with_digits(15, self.z.re, self.z.im),
        }
    }

    /// Estimated error of the root location, |a(z)| / |a'(z)|.
    pub fn root_error_estimate(&self) -> f64 {
        self.residual / self.deriv_abs.max(1e-300)
    }
}

/// Γ in 1/s: rate_SI = (|E1|/hbar) Γ.
pub fn decay_rate_si(r: &Resonance, units: &UnitScheme) -> f64 {
    units.to_si_rate(r.gamma)
}

/// A seed the Newton refinement gave up on, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct DroppedSeed {
    pub seed_k: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub resonances: Vec<Resonance>,
    pub dropped: Vec<DroppedSeed>,
}

/// Search knobs; the defaults are sized for unit-order potentials.
#[derive(Debug, Clone)]
pub struct ResonanceSearch {
    pub scan_points: usize,
    pub max_iter: usize,
}

impl Default for ResonanceSearch {
    fn default() -> Self {
        ResonanceSearch { scan_points: 4000, max_iter: 80 }
    }
}

fn eval_a_f64(v: &PiecewisePotential, k: Complex64) -> Result<Complex64, ScatteringError> {
    match v.shape() {
        Shape::DoubleWell { ell, delta, lambda } => {
            Ok(closed_form_double_well(ell, delta, lambda, &k)?.a().clone())
        }
        _ => Ok(solve_scattering(v, &k)?.a().clone()),
    }
}

fn eval_a_generic<C: ComplexField>(v: &PiecewisePotential, k: &C) -> Result<C, ScatteringError> {
    match v.shape() {
        Shape::DoubleWell { ell, delta, lambda } => {
            Ok(closed_form_double_well(ell, delta, lambda, k)?.a().clone())
        }
        _ => Ok(solve_scattering(v, k)?.a().clone()),
    }
}

struct Refined<C: ComplexField> {
    z: C,
    residual: f64,
    deriv: C,
    step_history: Vec<f64>,
}

/// Damped Newton on an analytic function, derivative by central differences
/// with step 10^(-digits/2) |z|.
fn refine_root<C, F>(f: &F, seed: C, digits: u32, max_iter: usize) -> Result<Refined<C>, String>
where
    C: ComplexField,
    F: Fn(&C) -> Result<C, ScatteringError>,
{
    let h_rel = 10f64.powi(-((digits / 2) as i32));
    let step_tol = 10f64.powf(-(digits as f64 - 6.0));
    let mut z = seed;
    let mut fz = f(&z).map_err(|e| e.to_string())?;
    let mut steps = Vec::new();

    for _ in 0..max_iter {
        let h_abs = z.abs_f64() * h_rel;
        let hc = z.embed(h_abs, 0.0);
        let fp = f(&(z.clone() + hc.clone())).map_err(|e| e.to_string())?;
        let fm = f(&(z.clone() - hc.clone())).map_err(|e| e.to_string())?;
        let deriv = (fp - fm) / hc.scale(2.0);
        if deriv.abs_f64() == 0.0 || !deriv.is_finite() {
            return Err("derivative vanished".into());
        }
        let step = fz.clone() / deriv.clone();

        let mut accepted = false;
        let mut taken = 0.0;
        for damp in 0..8 {
            let factor = 0.5f64.powi(damp);
            let z_try = z.clone() - step.scale(factor);
            let f_try = f(&z_try).map_err(|e| e.to_string())?;
            if f_try.abs_f64() < fz.abs_f64() || factor * step.abs_f64() <= step_tol * z.abs_f64() {
                z = z_try;
                fz = f_try;
                taken = factor * step.abs_f64();
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err("no descent step found".into());
        }
        steps.push(taken);
        if taken <= step_tol * z.abs_f64() {
            // converged; recompute the derivative at the final point
            let h_abs = z.abs_f64() * h_rel;
            let hc = z.embed(h_abs, 0.0);
            let fp = f(&(z.clone() + hc.clone())).map_err(|e| e.to_string())?;
            let fm = f(&(z.clone() - hc.clone())).map_err(|e| e.to_string())?;
            let deriv = (fp - fm) / hc.scale(2.0);
            return Ok(Refined { residual: fz.abs_f64(), z, deriv, step_history: steps });
        }
    }
    Err(format!("no convergence after {max_iter} iterations"))
}

/// Local minima of |a(k)|² on a uniform scan of the window.
fn scan_seeds(
    v: &PiecewisePotential,
    window: (f64, f64),
    n: usize,
) -> Result<Vec<f64>, ScatteringError> {
    let (lo, hi) = window;
    let mut vals = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let k = lo + (hi - lo) * i as f64 / n as f64;
        vals.push((k, eval_a_f64(v, Complex64::new(k, 0.0))?.norm_sqr()));
    }
    let mut seeds = Vec::new();
    for i in 1..n {
        if vals[i].1 < vals[i - 1].1 && vals[i].1 < vals[i + 1].1 {
            seeds.push(vals[i].0);
        }
    }
    Ok(seeds)
}

/// Locates roots of a(k) with Re z in the window and -max_im < Im z < 0,
/// sorted by Re z. An empty result is not an error; seeds whose refinement
/// fails are reported in `dropped`.
pub fn find_resonances_detailed(
    v: &PiecewisePotential,
    window: (f64, f64),
    max_im: f64,
    precision: Precision,
    search: &ResonanceSearch,
) -> Result<SearchOutcome, ResonanceError> {
    let (k_lo, k_hi) = window;
    if !(k_lo > 0.0 && k_hi > k_lo && max_im > 0.0) {
        return Err(ResonanceError::BadWindow);
    }
    let digits = precision.digits();
    let seeds = scan_seeds(v, window, search.scan_points)?;
    let mut found: Vec<Resonance> = Vec::new();
    let mut dropped = Vec::new();

    for seed in seeds {
        let refined = match precision {
            Precision::Double => {
                let f = |k: &Complex64| eval_a_f64(v, *k);
                refine_root(&f, Complex64::new(seed, 0.0), digits, search.max_iter).map(
                    |r| (r.z.to_c64(), None, r.residual, r.deriv.to_c64(), r.step_history),
                )
            }
            Precision::Extended(_) => {
                let f = |k: &MpComplex| eval_a_generic(v, k);
                refine_root(&f, MpComplex::with_digits(digits, seed, 0.0), digits, search.max_iter)
                    .map(|r| (r.z.to_c64(), Some(r.z), r.residual, r.deriv.to_c64(), r.step_history))
            }
        };
        let (z, z_mp, residual, deriv, _steps) = match refined {
            Ok(r) => r,
            Err(reason) => {
                dropped.push(DroppedSeed { seed_k: seed, reason });
                continue;
            }
        };

        // acceptance filters
        let im = z_mp.as_ref().map(|m| m.im_f64()).unwrap_or(z.im);
        if !(im < 0.0) || im < -max_im {
            dropped.push(DroppedSeed { seed_k: seed, reason: format!("Im z = {im:e} out of band") });
            continue;
        }
        if z.re < k_lo || z.re > k_hi {
            dropped.push(DroppedSeed { seed_k: seed, reason: "left the window".into() });
            continue;
        }
        let res_tol = deriv.norm() * z.norm() * 10f64.powf(-(digits as f64 - 6.0));
        if residual > res_tol {
            dropped.push(DroppedSeed {
                seed_k: seed,
                reason: format!("residual {residual:.3e} above {res_tol:.3e}"),
            });
            continue;
        }

        // duplicate merging
        let cluster = 1e3 * z.norm() * 10f64.powf(-(digits as f64 - 4.0));
        if let Some(existing) = found.iter_mut().find(|r| (r.z - z).norm() < cluster) {
            if residual < existing.residual {
                *existing = make_resonance(v, z, z_mp, residual, deriv, digits)?;
            }
            continue;
        }

        found.push(make_resonance(v, z, z_mp, residual, deriv, digits)?);
    }

    found.sort_by(|a, b| a.z.re.partial_cmp(&b.z.re).unwrap());
    Ok(SearchOutcome { resonances: found, dropped })
}

/// `find_resonances_detailed` with default search knobs, discarding
/// per-seed diagnostics.
pub fn find_resonances(
    v: &PiecewisePotential,
    window: (f64, f64),
    max_im: f64,
    precision: Precision,
) -> Result<Vec<Resonance>, ResonanceError> {
    Ok(find_resonances_detailed(v, window, max_im, precision, &ResonanceSearch::default())?
        .resonances)
}

fn make_resonance(
    v: &PiecewisePotential,
    z: Complex64,
    z_mp: Option<MpComplex>,
    residual: f64,
    deriv: Complex64,
    digits: u32,
) -> Result<Resonance, ResonanceError> {
    // E and Γ from the full-precision root where available
    let (energy, gamma) = match &z_mp {
        Some(m) => {
            let z2 = m.clone() * m.clone();
            (z2.re_f64(), -z2.im_f64())
        }
        None => {
            let z2 = z * z;
            (z2.re, -z2.im)
        }
    };

    let channel = match v.shape() {
        Shape::DoubleWell { ell, delta, lambda } => {
            let factors = match &z_mp {
                Some(m) => {
                    let sol = closed_form_double_well(ell, delta, lambda, m)?;
                    let (a1, a2) = sol.channel_factors().expect("closed form");
                    (a1.abs_f64(), a2.abs_f64())
                }
                None => {
                    let sol = closed_form_double_well(ell, delta, lambda, &z)?;
                    let (a1, a2) = sol.channel_factors().expect("closed form");
                    (a1.abs_f64(), a2.abs_f64())
                }
            };
            let (abs1, abs2) = factors;
            if abs1 < 1e-3 * abs2 {
                Channel::Odd
            } else if abs2 < 1e-3 * abs1 {
                Channel::Even
            } else {
                Channel::None
            }
        }
        _ => Channel::None,
    };

    // residue scale c with G sup-normalized: Res u± = f±(z,·)/(sqrt(2π) a'(z))
    // = (s / (sqrt(2π) a'(z))) G, where s is the sup of |f₊(z,·)| on the
    // normalization window.
    let mut r = Resonance {
        z,
        z_mp,
        energy,
        gamma,
        residue_scale: Complex64::new(0.0, 0.0),
        channel,
        residual,
        deriv_abs: deriv.norm(),
        digits,
    };
    let sup = gamow_sup_scale(v, &r)?;
    r.residue_scale = Complex64::new(sup / SQRT_2PI, 0.0) / deriv;
    Ok(r)
}

fn solve_at_root(v: &PiecewisePotential, r: &Resonance) -> Result<ScatteringSolution<MpComplex>, ScatteringError> {
    let z = r.z_at_working_precision();
    match v.shape() {
        Shape::DoubleWell { ell, delta, lambda } => closed_form_double_well(ell, delta, lambda, &z),
        _ => solve_scattering(v, &z),
    }
}

fn gamow_sup_scale(v: &PiecewisePotential, r: &Resonance) -> Result<f64, ScatteringError> {
    let sol = solve_at_root(v, r)?;
    let w = v.inner_half_width();
    let n = 4096;
    let mut sup = 0.0_f64;
    for i in 0..=n {
        let x = -w + 2.0 * w * i as f64 / n as f64;
        sup = sup.max(sol.f_plus(x).abs_f64());
    }
    Ok(sup)
}

/// Piecewise closed-form Gamow function with purely outgoing tails,
/// sup-normalized to 1 on the potential's inner window.
#[derive(Debug, Clone)]
pub struct GamowFunction {
    z: Complex64,
    breakpoints: Vec<f64>,
    /// Per region: (kappa, alpha, beta) so G = alpha e^{i kappa x} + beta e^{-i kappa x}.
    regions: Vec<(Complex64, Complex64, Complex64)>,
    norm_window: f64,
}

impl GamowFunction {
    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn norm_window(&self) -> f64 {
        self.norm_window
    }

    fn region_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let (kappa, alpha, beta) = self.regions[self.region_index(x)];
        let ph = (Complex64::i() * kappa * x).exp();
        alpha * ph + beta / ph
    }

    pub fn eval_deriv(&self, x: f64) -> Complex64 {
        let (kappa, alpha, beta) = self.regions[self.region_index(x)];
        let ph = (Complex64::i() * kappa * x).exp();
        Complex64::i() * kappa * (alpha * ph - beta / ph)
    }

    /// Plane-wave coefficients (cos, i·sin basis) of the region containing
    /// x = 0: G(x) = c_cos cos(kappa x) + c_isin i sin(kappa x) there.
    pub fn middle_wave_coefficients(&self) -> (Complex64, Complex64) {
        let (_, alpha, beta) = self.regions[self.region_index(0.0)];
        (alpha + beta, alpha - beta)
    }

    /// ∫ |G|² over [-w, w] by panelwise Gauss-Legendre.
    pub fn norm_sqr_on(&self, half_width: f64) -> f64 {
        let mut cuts: Vec<f64> = vec![-half_width];
        cuts.extend(self.breakpoints.iter().copied().filter(|&b| b.abs() < half_width));
        cuts.push(half_width);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let n_sub = (((hi - lo) * (self.z.norm() + 1.0) / 4.0).ceil() as usize).max(1);
            for j in 0..n_sub {
                let a = lo + (hi - lo) * j as f64 / n_sub as f64;
                let b = lo + (hi - lo) * (j + 1) as f64 / n_sub as f64;
                total += gl15_integrate_f64(a, b, |x| self.eval(x).norm_sqr());
            }
        }
        total
    }

    /// Restriction to [-half_width, half_width], zero outside.
    pub fn truncated(&self, half_width: f64) -> TruncatedGamow {
        TruncatedGamow { gamow: self.clone(), half_width }
    }
}

/// 1_w G: the square-integrable truncation of a Gamow function.
#[derive(Debug, Clone)]
pub struct TruncatedGamow {
    gamow: GamowFunction,
    half_width: f64,
}

impl TruncatedGamow {
    pub fn gamow(&self) -> &GamowFunction {
        &self.gamow
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        if x.abs() <= self.half_width {
            self.gamow.eval(x)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.gamow.norm_sqr_on(self.half_width)
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<Complex64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Builds the Gamow function G = f₊(z,·)/s after verifying the reflection
/// amplitudes at the root within a tolerance tied to the root accuracy:
/// a(z) = 0 forces b₊(z) b₋(z) = 1 (vanishing Wronskian makes f₊ a multiple
/// of f₋), and for parity eigenchannels of a symmetric potential b±(z) = +1
/// (even) or -1 (odd). The incoming component on the left tail (of size
/// |a(z)|, the root residual) is dropped so the boundary condition is purely
/// outgoing by construction.
pub fn gamow_from_resonance(
    v: &PiecewisePotential,
    r: &Resonance,
) -> Result<GamowFunction, ResonanceError> {
    let sol = solve_at_root(v, r)?;
    let tol = (1e4 * r.root_error_estimate()).max(1e-8);
    let product_defect =
        (sol.b_plus().clone() * sol.b_minus().clone() - sol.k().embed(1.0, 0.0)).abs_f64();
    if product_defect > tol {
        return Err(ResonanceError::InconsistentRoot { defect: product_defect, tol });
    }
    let expected_sign = match r.channel {
        Channel::Even => Some(1.0),
        Channel::Odd => Some(-1.0),
        Channel::None => None,
    };
    if let Some(sign) = expected_sign {
        for b in [sol.b_plus(), sol.b_minus()] {
            let defect = (b.clone() - b.embed(sign, 0.0)).abs_f64();
            if defect > tol {
                return Err(ResonanceError::InconsistentRoot { defect, tol });
            }
        }
    }

    let s = gamow_sup_scale(v, r)?;
    let n_regions = sol.regions().len();
    let mut regions: Vec<(Complex64, Complex64, Complex64)> = sol
        .regions()
        .iter()
        .map(|reg| {
            (
                reg.kappa.to_c64(),
                reg.plus.0.scale(1.0 / s).to_c64(),
                reg.plus.1.scale(1.0 / s).to_c64(),
            )
        })
        .collect();
    // purely outgoing tails: no incoming wave on the far left
    regions[0].1 = Complex64::new(0.0, 0.0);
    regions[n_regions - 1].2 = Complex64::new(0.0, 0.0);

    Ok(GamowFunction {
        z: r.z,
        breakpoints: sol.breakpoints().to_vec(),
        regions,
        norm_window: v.inner_half_width(),
    })
}

/// Argument-principle check that exactly one zero of a(k) lies in a small
/// rectangle around the stored root.
pub fn verify_simple_root(v: &PiecewisePotential, r: &Resonance) -> Result<bool, ResonanceError> {
    let im_abs = r.z.im.abs();
    let half_im = 4.0 * im_abs;
    let half_re = (4.0 * im_abs).max(r.z.norm() * 1e-9);
    let rect = Rectangle {
        re_lo: r.z.re - half_re,
        re_hi: r.z.re + half_re,
        im_lo: r.z.im - half_im,
        im_hi: r.z.im + half_im,
    };
    let count = match &r.z_mp {
        Some(template) => {
            let f = |k: &MpComplex| eval_a_generic(v, k).expect("contour stays off degeneracies");
            count_zeros_rectangle(f, rect, template, 24)?
        }
        None => {
            let f = |k: &Complex64| eval_a_f64(v, *k).expect("contour stays off degeneracies");
            count_zeros_rectangle(f, rect, &Complex64::new(0.0, 0.0), 24)?
        }
    };
    Ok(count == 1)
}
