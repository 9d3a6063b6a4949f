//! Scattering solutions f±(k,x) for piecewise-constant potentials with the
//! outgoing normalization c± = 1, via two interchangeable backends: a general
//! transfer-matrix sweep and closed-form coefficients for the double well.
//!
//! With c± = 1 the functions f±, a and b± are entire in k; the zeros of a(k)
//! in the lower half-plane are the resonances and 1/|a|² is the transmission
//! coefficient at real k.

use num_complex::Complex64;
use thiserror::Error;

use crate::cpx::ComplexField;
use crate::potential::{PiecewisePotential, Shape};

pub const SQRT_2PI: f64 = 2.5066282746310002;

#[derive(Debug, Error, PartialEq)]
pub enum ScatteringError {
    #[error("k = 0 (or a region wavenumber vanished) is a degenerate point of the sweep")]
    DegeneratePoint,
    #[error("overflow at the requested precision; roughly {needed_digits} decimal digits needed")]
    PrecisionExhausted { needed_digits: u32 },
    #[error("normalized eigenfunctions have a pole here: a(k) = 0")]
    AtResonance,
    #[error("transmission/reflection coefficients need real k > 0")]
    NotRealWavenumber,
    #[error("closed form only exists for the double well")]
    NotDoubleWell,
    #[error("need at least {0} sample points")]
    TooFewSamples(usize),
}

/// Per-region plane-wave data: f(x) = alpha e^{i kappa x} + beta e^{-i kappa x}.
#[derive(Debug, Clone)]
pub struct Region<C: ComplexField> {
    pub kappa: C,
    /// (alpha, beta) for f_plus on this region.
    pub plus: (C, C),
    /// (alpha, beta) for f_minus on this region.
    pub minus: (C, C),
}

/// Solutions f±(k, x) at one wavenumber, with the shared coefficient
/// a = a₊ = a₋ and the reflection amplitudes b±.
#[derive(Debug, Clone)]
pub struct ScatteringSolution<C: ComplexField> {
    k: C,
    a_plus: C,
    a_minus: C,
    b_plus: C,
    b_minus: C,
    breakpoints: Vec<f64>,
    regions: Vec<Region<C>>,
    /// (a₁, a₂) from the double-well closed form, when that backend was used.
    channel_factors: Option<(C, C)>,
}

/// Values of the normalized generalized eigenfunctions at one (k, x).
#[derive(Debug, Clone)]
pub struct EigenfunctionValue<C: ComplexField> {
    pub u_plus: C,
    pub u_minus: C,
}

/// Rough decimal-digit requirement to keep the evanescent growth of the
/// sweep representable, used in overflow diagnostics.
fn required_digits_estimate(v: &PiecewisePotential, k_abs: f64) -> u32 {
    let mut growth = 0.0_f64;
    let bps = v.breakpoints();
    for (j, &h) in v.heights().iter().enumerate() {
        let width = bps[j + 1] - bps[j];
        let gap = h - k_abs * k_abs;
        if gap > 0.0 {
            growth += gap.sqrt() * width;
        }
    }
    (2.0 * growth * std::f64::consts::LOG10_E).ceil() as u32 + 30
}

fn check_finite<C: ComplexField>(sol: &ScatteringSolution<C>, v: &PiecewisePotential) -> Result<(), ScatteringError> {
    let ok = sol.a_plus.is_finite()
        && sol.a_minus.is_finite()
        && sol.b_plus.is_finite()
        && sol.b_minus.is_finite()
        && sol.regions.iter().all(|r| {
            r.kappa.is_finite()
                && r.plus.0.is_finite()
                && r.plus.1.is_finite()
                && r.minus.0.is_finite()
                && r.minus.1.is_finite()
        });
    if ok {
        Ok(())
    } else {
        Err(ScatteringError::PrecisionExhausted {
            needed_digits: required_digits_estimate(v, sol.k.abs_f64()),
        })
    }
}

/// Region wavenumbers sqrt(k² - λ_j), principal branch, with optional sign
/// flips per interior region. All solution outputs are invariant under the
/// flips; a fixed principal choice keeps runs bit-reproducible.
fn region_wavenumbers<C: ComplexField>(
    v: &PiecewisePotential,
    k: &C,
    flips: Option<&[bool]>,
) -> Result<Vec<C>, ScatteringError> {
    let mut out = Vec::with_capacity(v.heights().len());
    for (j, &h) in v.heights().iter().enumerate() {
        let mut kap = (k.clone() * k.clone() - k.embed(h, 0.0)).sqrt();
        if let Some(f) = flips {
            if f.get(j).copied().unwrap_or(false) {
                kap = -kap;
            }
        }
        if kap.abs_f64() == 0.0 {
            return Err(ScatteringError::DegeneratePoint);
        }
        out.push(kap);
    }
    Ok(out)
}

/// Plane-wave amplitudes (alpha, beta) of a region from (value, derivative)
/// at a point x inside it.
fn amplitudes_from_cauchy_data<C: ComplexField>(x: f64, f: &C, df: &C, kappa: &C) -> (C, C) {
    let t = df.clone() / kappa.mul_i();
    let alpha = (f.clone() + t.clone()).scale(0.5) * kappa.mul_i().scale(-x).exp();
    let beta = (f.clone() - t).scale(0.5) * kappa.mul_i().scale(x).exp();
    (alpha, beta)
}

/// Propagate (value, derivative) of a solution of -u'' = (k² - λ) u across a
/// region of width `w` (signed), using only width-sized phase arguments.
fn propagate_cauchy_data<C: ComplexField>(f: &C, df: &C, kappa: &C, w: f64) -> (C, C) {
    let arg = kappa.scale(w);
    let c = arg.cos();
    let s_over_kappa = arg.sin() / kappa.clone();
    let f_new = f.clone() * c.clone() + df.clone() * s_over_kappa.clone();
    let df_new = -(f.clone() * kappa.clone() * kappa.clone() * s_over_kappa) + df.clone() * c;
    (f_new, df_new)
}

/// Transfer-matrix backend. Sweeps inward from the outgoing side so c± = 1
/// is imposed exactly and a, b± are read off the far region.
pub fn solve_scattering<C: ComplexField>(
    v: &PiecewisePotential,
    k: &C,
) -> Result<ScatteringSolution<C>, ScatteringError> {
    solve_scattering_branch_flipped(v, k, None)
}

/// Transfer-matrix backend with explicit branch flips of the interior region
/// wavenumbers, exposed for branch-invariance checks.
pub fn solve_scattering_branch_flipped<C: ComplexField>(
    v: &PiecewisePotential,
    k: &C,
    flips: Option<&[bool]>,
) -> Result<ScatteringSolution<C>, ScatteringError> {
    if k.abs_f64() == 0.0 || !k.is_finite() {
        return Err(ScatteringError::DegeneratePoint);
    }
    let bps = v.breakpoints();
    let m = v.heights().len();
    let one = k.embed(1.0, 0.0);
    let zero = k.embed(0.0, 0.0);

    if m == 0 {
        // free region everywhere
        let sol = ScatteringSolution {
            k: k.clone(),
            a_plus: one.clone(),
            a_minus: one.clone(),
            b_plus: zero.clone(),
            b_minus: zero.clone(),
            breakpoints: vec![],
            regions: vec![Region {
                kappa: k.clone(),
                plus: (one.clone(), zero.clone()),
                minus: (zero, one),
            }],
            channel_factors: None,
        };
        return Ok(sol);
    }

    let kappas = region_wavenumbers(v, k, flips)?;
    let kap_of = |j: usize| -> &C {
        // region j: 0 and m+1 are exterior (kappa = k)
        if j == 0 || j == m + 1 {
            k
        } else {
            &kappas[j - 1]
        }
    };

    // f_plus: e^{ikx} on the right exterior; carry (value, derivative)
    // leftward breakpoint to breakpoint and read amplitudes off locally
    let mut plus: Vec<(C, C)> = vec![(zero.clone(), zero.clone()); m + 2];
    plus[m + 1] = (one.clone(), zero.clone());
    let mut f = k.mul_i().scale(bps[m]).exp();
    let mut df = f.clone() * k.mul_i();
    for j in (1..=m).rev() {
        // region j spans [bps[j-1], bps[j]]
        plus[j] = amplitudes_from_cauchy_data(bps[j], &f, &df, kap_of(j));
        let (nf, ndf) = propagate_cauchy_data(&f, &df, kap_of(j), bps[j - 1] - bps[j]);
        f = nf;
        df = ndf;
    }
    plus[0] = amplitudes_from_cauchy_data(bps[0], &f, &df, k);

    // f_minus: e^{-ikx} on the left exterior, carried rightward
    let mut minus: Vec<(C, C)> = vec![(zero.clone(), zero.clone()); m + 2];
    minus[0] = (zero.clone(), one.clone());
    let mut f = k.mul_i().scale(-bps[0]).exp();
    let mut df = -(f.clone() * k.mul_i());
    for j in 1..=m {
        minus[j] = amplitudes_from_cauchy_data(bps[j - 1], &f, &df, kap_of(j));
        let (nf, ndf) = propagate_cauchy_data(&f, &df, kap_of(j), bps[j] - bps[j - 1]);
        f = nf;
        df = ndf;
    }
    minus[m + 1] = amplitudes_from_cauchy_data(bps[m], &f, &df, k);

    let regions = (0..m + 2)
        .map(|j| Region {
            kappa: kap_of(j).clone(),
            plus: plus[j].clone(),
            minus: minus[j].clone(),
        })
        .collect();

    let sol = ScatteringSolution {
        k: k.clone(),
        a_plus: plus[0].0.clone(),
        b_plus: plus[0].1.clone(),
        a_minus: minus[m + 1].1.clone(),
        b_minus: minus[m + 1].0.clone(),
        breakpoints: bps.to_vec(),
        regions,
        channel_factors: None,
    };
    check_finite(&sol, v)?;
    Ok(sol)
}

/// Closed-form backend for the double well, coefficients evaluated exactly as
/// derived for barriers of height λ on [-(ℓ+δ), -ℓ] and [ℓ, ℓ+δ].
pub fn closed_form_double_well<C: ComplexField>(
    ell: f64,
    delta: f64,
    lambda: f64,
    k: &C,
) -> Result<ScatteringSolution<C>, ScatteringError> {
    closed_form_double_well_branch(ell, delta, lambda, k, false)
}

/// Closed form with the opposite branch of k̃ = sqrt(k² - λ); the output is
/// invariant (the coefficient functions are even in k̃).
pub fn closed_form_double_well_branch<C: ComplexField>(
    ell: f64,
    delta: f64,
    lambda: f64,
    k: &C,
    flip_branch: bool,
) -> Result<ScatteringSolution<C>, ScatteringError> {
    if k.abs_f64() == 0.0 || !k.is_finite() {
        return Err(ScatteringError::DegeneratePoint);
    }
    let v = PiecewisePotential::double_well(ell, delta, lambda)
        .map_err(|_| ScatteringError::NotDoubleWell)?;

    let mut kt = (k.clone() * k.clone() - k.embed(lambda, 0.0)).sqrt();
    if flip_branch {
        kt = -kt;
    }
    if kt.abs_f64() == 0.0 {
        return Err(ScatteringError::DegeneratePoint);
    }

    let half_i = k.embed(0.0, 0.5);
    let quarter_i = k.embed(0.0, 0.25);
    let one = k.embed(1.0, 0.0);

    let ratio_p = k.clone() / kt.clone() + kt.clone() / k.clone();
    let ratio_m = k.clone() / kt.clone() - kt.clone() / k.clone();
    let s = kt.scale(delta).sin();
    let c = kt.scale(delta).cos();
    let a_cap = c.clone() - half_i.clone() * ratio_p.clone() * s.clone();
    let a_cap_bar = c + half_i.clone() * ratio_p * s.clone();
    let e_2ikl = k.mul_i().scale(2.0 * ell).exp();
    let e_m2ikl = k.mul_i().scale(-2.0 * ell).exp();
    let e_ikd = k.mul_i().scale(delta).exp();

    let com = half_i.clone() * e_2ikl.clone() * ratio_m.clone() * s.clone();
    let a1 = e_ikd.clone() * (a_cap.clone() - com.clone());
    let a2 = e_ikd * (a_cap.clone() + com);
    let a = a1.clone() * a2.clone();
    let b_plus = -(half_i * ratio_m.clone() * s.clone())
        * (a_cap.clone() * e_m2ikl + a_cap_bar * e_2ikl);

    // amplitudes on [-(ℓ+δ), -ℓ): c1 e^{i k̃ x} + c2 e^{-i k̃ x}
    let c12 = |sgn: f64| -> C {
        let phase1 = (kt.mul_i().scale(sgn * ell) + k.mul_i().scale(-(ell - delta))).exp();
        let phase2 = (kt.mul_i().scale(sgn * ell) + k.mul_i().scale(3.0 * ell + delta)).exp();
        phase1 * (one.clone() + (k.clone() / kt.clone()).scale(sgn)).scale(0.5) * a_cap.clone()
            - quarter_i.clone()
                * phase2
                * (one.clone() - (k.clone() / kt.clone()).scale(sgn))
                * ratio_m.clone()
                * s.clone()
    };
    let (c1, c2) = (c12(1.0), c12(-1.0));

    // amplitudes on (ℓ, ℓ+δ]
    let c34 = |sgn: f64| -> C {
        (one.clone() + (k.clone() / kt.clone()).scale(sgn)).scale(0.5)
            * ((k.clone() - kt.scale(sgn)).mul_i().scale(ell + delta)).exp()
    };
    let (c3, c4) = (c34(1.0), c34(-1.0));

    // middle region a₁ cos(kx) + i a₂ sin(kx) in plane-wave form
    let mid_alpha = (a1.clone() + a2.clone()).scale(0.5);
    let mid_beta = (a1.clone() - a2.clone()).scale(0.5);

    let zero = k.embed(0.0, 0.0);
    let plus: [(C, C); 5] = [
        (a.clone(), b_plus.clone()),
        (c1, c2),
        (mid_alpha, mid_beta),
        (c3, c4),
        (one.clone(), zero.clone()),
    ];
    // V is even, so f₋(k, x) = f₊(k, -x): mirror regions and swap (alpha, beta)
    let minus: Vec<(C, C)> = (0..5).map(|j| (plus[4 - j].1.clone(), plus[4 - j].0.clone())).collect();

    let kappas = [k.clone(), kt.clone(), k.clone(), kt.clone(), k.clone()];
    let regions = (0..5)
        .map(|j| Region {
            kappa: kappas[j].clone(),
            plus: plus[j].clone(),
            minus: minus[j].clone(),
        })
        .collect();

    let sol = ScatteringSolution {
        k: k.clone(),
        a_plus: a.clone(),
        a_minus: a,
        b_plus: b_plus.clone(),
        b_minus: b_plus,
        breakpoints: v.breakpoints().to_vec(),
        regions,
        channel_factors: Some((a1, a2)),
    };
    check_finite(&sol, &v)?;
    Ok(sol)
}

/// Double-well channel factors (a₁, a₂) with a = a₁ a₂.
pub fn double_well_channel_factors<C: ComplexField>(
    v: &PiecewisePotential,
    k: &C,
) -> Result<(C, C), ScatteringError> {
    match v.shape() {
        Shape::DoubleWell { ell, delta, lambda } => {
            let sol = closed_form_double_well(ell, delta, lambda, k)?;
            Ok(sol.channel_factors.expect("closed form sets factors"))
        }
        _ => Err(ScatteringError::NotDoubleWell),
    }
}

impl<C: ComplexField> ScatteringSolution<C> {
    pub fn k(&self) -> &C {
        &self.k
    }

    /// The shared coefficient a = a₊ = a₋ (the a₊ value).
    pub fn a(&self) -> &C {
        &self.a_plus
    }

    pub fn a_minus(&self) -> &C {
        &self.a_minus
    }

    pub fn b_plus(&self) -> &C {
        &self.b_plus
    }

    pub fn b_minus(&self) -> &C {
        &self.b_minus
    }

    pub fn channel_factors(&self) -> Option<&(C, C)> {
        self.channel_factors.as_ref()
    }

    pub fn regions(&self) -> &[Region<C>] {
        &self.regions
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Relative disagreement between the independently computed a₊ and a₋.
    pub fn a_consistency(&self) -> f64 {
        let denom = self.a_plus.abs_f64().max(self.a_minus.abs_f64()).max(1e-300);
        (self.a_plus.clone() - self.a_minus.clone()).abs_f64() / denom
    }

    fn region_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    fn eval(&self, amps: fn(&Region<C>) -> &(C, C), x: f64, derivative: bool) -> C {
        let r = &self.regions[self.region_index(x)];
        let (alpha, beta) = amps(r);
        let phase = r.kappa.mul_i().scale(x).exp();
        let inv_phase = r.kappa.embed(1.0, 0.0) / phase.clone();
        if derivative {
            (alpha.clone() * phase - beta.clone() * inv_phase) * r.kappa.mul_i()
        } else {
            alpha.clone() * phase + beta.clone() * inv_phase
        }
    }

    pub fn f_plus(&self, x: f64) -> C {
        self.eval(|r| &r.plus, x, false)
    }

    pub fn f_plus_deriv(&self, x: f64) -> C {
        self.eval(|r| &r.plus, x, true)
    }

    pub fn f_minus(&self, x: f64) -> C {
        self.eval(|r| &r.minus, x, false)
    }

    pub fn f_minus_deriv(&self, x: f64) -> C {
        self.eval(|r| &r.minus, x, true)
    }

    /// u±(k,x) = f±(k,x) / (sqrt(2π) a(k)); errors where a = 0 (a resonance,
    /// where the normalized eigenfunctions have their poles).
    pub fn eigenfunction_at(&self, x: f64) -> Result<EigenfunctionValue<C>, ScatteringError> {
        if self.a_plus.abs_f64() == 0.0 {
            return Err(ScatteringError::AtResonance);
        }
        let norm = self.a_plus.scale(SQRT_2PI);
        Ok(EigenfunctionValue {
            u_plus: self.f_plus(x) / norm.clone(),
            u_minus: self.f_minus(x) / norm,
        })
    }

    /// (T, R₊, R₋) at real k > 0.
    pub fn transmission_reflection(&self) -> Result<(f64, f64, f64), ScatteringError> {
        let k_re = self.k.re_f64();
        if !(k_re > 0.0) || self.k.im_f64().abs() > 1e-12 * k_re.abs() {
            return Err(ScatteringError::NotRealWavenumber);
        }
        let a2 = self.a_plus.abs_f64().powi(2);
        Ok((
            1.0 / a2,
            self.b_plus.abs_f64().powi(2) / a2,
            self.b_minus.abs_f64().powi(2) / a2,
        ))
    }

    /// W(f₊, f₋) = f₊ f₋' - f₊' f₋ evaluated at x; equals -2ik a(k) for every x.
    pub fn wronskian_at(&self, x: f64) -> C {
        self.f_plus(x) * self.f_minus_deriv(x) - self.f_plus_deriv(x) * self.f_minus(x)
    }

    /// max over samples of |W(x) + 2ik a| / (|2ik a| + eps_floor).
    pub fn wronskian_residual(&self, x_samples: &[f64]) -> Result<f64, ScatteringError> {
        if x_samples.len() < 2 {
            return Err(ScatteringError::TooFewSamples(2));
        }
        let expected = -(self.k.mul_i().scale(2.0) * self.a_plus.clone());
        let denom = expected.abs_f64() + 1e-300;
        let mut worst = 0.0_f64;
        for &x in x_samples {
            let w = self.wronskian_at(x);
            worst = worst.max((w - expected.clone()).abs_f64() / denom);
        }
        Ok(worst)
    }
}

/// Scans a(iκ) for κ in (0, κ_max]; a sign change of the (real) values flags
/// a bound state. Advisory: the expansion machinery assumes none exist.
pub fn bound_state_diagnostic(v: &PiecewisePotential) -> bool {
    let depth = -v.min_height();
    if v.heights().is_empty() {
        return false;
    }
    let kappa_max = depth.max(0.0).sqrt() + 1.0;
    let n = 2000;
    let mut prev: Option<f64> = None;
    for i in 1..=n {
        let kappa = kappa_max * i as f64 / n as f64;
        let k = Complex64::new(0.0, kappa);
        let val = match solve_scattering(v, &k) {
            Ok(sol) => sol.a().re,
            Err(_) => continue,
        };
        if let Some(p) = prev {
            if p * val < 0.0 {
                return true;
            }
        }
        prev = Some(val);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpx::MpComplex;
    use proptest::prelude::*;

    fn dw() -> PiecewisePotential {
        PiecewisePotential::double_well(1.0, 2.0, 436.0).unwrap()
    }

    #[test]
    fn free_potential_is_transparent() {
        let v = PiecewisePotential::free();
        for k in [Complex64::new(0.8, 0.0), Complex64::new(3.0, -0.4)] {
            let sol = solve_scattering(&v, &k).unwrap();
            assert_eq!(sol.a().to_c64(), Complex64::new(1.0, 0.0));
            assert_eq!(sol.b_plus().to_c64(), Complex64::new(0.0, 0.0));
            for x in [-5.0, 0.0, 2.5] {
                let expect = (k * Complex64::i() * x).exp();
                assert!((sol.f_plus(x) - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn free_eigenfunction_normalization() {
        let v = PiecewisePotential::free();
        let sol = solve_scattering(&v, &Complex64::new(1.0, 0.0)).unwrap();
        let u = sol.eigenfunction_at(0.0).unwrap();
        assert!((u.u_plus - Complex64::new(1.0 / SQRT_2PI, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn k_zero_is_degenerate() {
        let v = dw();
        assert_eq!(
            solve_scattering(&v, &Complex64::new(0.0, 0.0)).unwrap_err(),
            ScatteringError::DegeneratePoint
        );
    }

    #[test]
    fn backends_agree_on_double_well() {
        let v = dw();
        for k in [
            Complex64::new(2.3, 0.0),
            Complex64::new(7.5, 0.0),
            Complex64::new(12.0, -0.5),
            Complex64::new(25.0, 0.7),
            Complex64::new(4.0, -1.0),
        ] {
            let tm = solve_scattering(&v, &k).unwrap();
            let cf = closed_form_double_well(1.0, 2.0, 436.0, &k).unwrap();
            let scale = cf.a().norm();
            assert!((tm.a() - cf.a()).norm() < 1e-12 * scale, "a mismatch at k={k}");
            assert!(
                (tm.b_plus() - cf.b_plus()).norm() < 1e-12 * scale,
                "b mismatch at k={k}"
            );
            for (rt, rc) in tm.regions().iter().zip(cf.regions().iter()) {
                for (t, c) in [(&rt.plus, &rc.plus), (&rt.minus, &rc.minus)] {
                    let local = c.0.norm().max(c.1.norm()).max(1.0);
                    assert!((t.0 - c.0).norm() < 1e-11 * local);
                    assert!((t.1 - c.1).norm() < 1e-11 * local);
                }
            }
        }
    }

    #[test]
    fn closed_form_free_limit() {
        let sol = closed_form_double_well(1.0, 2.0, 1e-12, &Complex64::new(1.7, 0.0)).unwrap();
        assert!((sol.a() - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(sol.b_plus().norm() < 1e-9);
    }

    #[test]
    fn closed_form_branch_invariance() {
        let mut state = 0x2545f4914f6cdd1du64;
        for _ in 0..50 {
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let k = Complex64::new(0.3 + 30.0 * next(), 2.0 * next() - 1.0);
            let a = closed_form_double_well(1.0, 2.0, 436.0, &k).unwrap();
            let b = closed_form_double_well_branch(1.0, 2.0, 436.0, &k, true).unwrap();
            let scale = a.a().norm();
            assert!((a.a() - b.a()).norm() <= 1e-12 * scale);
            assert!((a.b_plus() - b.b_plus()).norm() <= 1e-12 * scale);
            let (a1, a2) = a.channel_factors().unwrap();
            let (b1, b2) = b.channel_factors().unwrap();
            assert!((a1 - b1).norm() <= 1e-12 * a1.norm());
            assert!((a2 - b2).norm() <= 1e-12 * a2.norm());
        }
    }

    #[test]
    fn transfer_branch_invariance() {
        let v = PiecewisePotential::from_breakpoints(vec![-2.0, -0.5, 1.0, 2.5], vec![11.0, 3.0, 25.0]).unwrap();
        let k = Complex64::new(2.1, -0.3);
        let base = solve_scattering(&v, &k).unwrap();
        for flips in [[true, false, false], [false, true, false], [true, true, true]] {
            let flipped = solve_scattering_branch_flipped(&v, &k, Some(&flips)).unwrap();
            assert!((base.a() - flipped.a()).norm() < 1e-12 * base.a().norm());
            assert!((base.b_plus() - flipped.b_plus()).norm() < 1e-12 * base.a().norm());
            for x in [-3.0, -1.0, 0.3, 1.8, 4.0] {
                let d = (base.f_plus(x) - flipped.f_plus(x)).norm();
                assert!(d < 1e-11 * base.f_plus(x).norm().max(1.0));
            }
        }
    }

    #[test]
    fn resonant_transmission_peak_near_scan_minimum() {
        // |a| has a deep local minimum near k = 7.4872 and T a local maximum
        let v = dw();
        let t_at = |k: f64| {
            solve_scattering(&v, &Complex64::new(k, 0.0))
                .unwrap()
                .transmission_reflection()
                .unwrap()
                .0
        };
        let mut best_k = 0.0;
        let mut best = 0.0;
        let n = 4000;
        for i in 0..=n {
            let k = 7.0 + i as f64 / n as f64;
            let t = t_at(k);
            if t > best {
                best = t;
                best_k = k;
            }
        }
        assert!((best_k - 7.4872).abs() < 2e-3, "T peak at {best_k}");
        assert!(best > t_at(7.2) * 10.0);
    }

    #[test]
    fn overflow_reports_needed_digits() {
        let v = PiecewisePotential::double_well(1.0, 20.0, 1.0e6).unwrap();
        match solve_scattering(&v, &Complex64::new(1.0, 0.0)) {
            Err(ScatteringError::PrecisionExhausted { needed_digits }) => {
                assert!(needed_digits > 1000, "digits = {needed_digits}");
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn mp_backend_matches_f64() {
        let v = dw();
        let kf = Complex64::new(7.49, -0.02);
        let km = MpComplex::with_digits(40, 7.49, -0.02);
        let sf = solve_scattering(&v, &kf).unwrap();
        let sm = solve_scattering(&v, &km).unwrap();
        assert!((sf.a() - sm.a().to_c64()).norm() < 1e-12 * sf.a().norm());
        let cf = closed_form_double_well(1.0, 2.0, 436.0, &km).unwrap();
        assert!((sf.a() - cf.a().to_c64()).norm() < 1e-12 * sf.a().norm());
    }

    #[test]
    fn bound_state_diagnostic_cases() {
        assert!(!bound_state_diagnostic(&dw()));
        assert!(!bound_state_diagnostic(&PiecewisePotential::free()));
        // an attractive well in 1D always binds
        assert!(bound_state_diagnostic(&PiecewisePotential::rectangular_well(1.0, 5.0).unwrap()));
    }

    #[test]
    fn eigenfunction_triangle_bound() {
        let v = dw();
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let k = Complex64::new(0.5 + 25.0 * next(), 0.0);
            let x = 8.0 * next() - 4.0;
            let sol = solve_scattering(&v, &k).unwrap();
            let u = sol.eigenfunction_at(x).unwrap();
            let r = &sol.regions()[sol.region_index(x)];
            let grow = (r.kappa.im.abs() * x.abs()).exp();
            let bound = (r.plus.0.norm() + r.plus.1.norm()) * grow / (SQRT_2PI * sol.a().norm());
            assert!(u.u_plus.norm() <= bound * (1.0 + 1e-12));
        }
    }

    proptest! {
        #[test]
        fn flux_conservation_random_k(k in 0.05f64..30.0) {
            let v = dw();
            let sol = solve_scattering(&v, &Complex64::new(k, 0.0)).unwrap();
            let (t, r_plus, r_minus) = sol.transmission_reflection().unwrap();
            prop_assert!((t + r_plus - 1.0).abs() < 1e-10);
            prop_assert!((t + r_minus - 1.0).abs() < 1e-10);
        }

        #[test]
        fn wronskian_identity_real_k(k in 0.05f64..30.0) {
            let v = dw();
            let sol = solve_scattering(&v, &Complex64::new(k, 0.0)).unwrap();
            let xs: Vec<f64> = (0..20).map(|i| -4.5 + i as f64 * 0.5).collect();
            prop_assert!(sol.wronskian_residual(&xs).unwrap() < 1e-10);
        }

        #[test]
        fn wronskian_identity_complex_k(re in 0.3f64..20.0, im in -1.0f64..1.0) {
            let v = dw();
            let sol = solve_scattering(&v, &Complex64::new(re, im)).unwrap();
            let xs: Vec<f64> = (0..20).map(|i| -4.5 + i as f64 * 0.5).collect();
            prop_assert!(sol.wronskian_residual(&xs).unwrap() < 1e-8);
        }

        #[test]
        fn a_plus_equals_a_minus_asymmetric(re in 0.3f64..15.0, im in -0.8f64..0.8) {
            // asymmetric potential: the two sweeps are genuinely independent
            let v = PiecewisePotential::from_breakpoints(
                vec![-1.7, -0.3, 0.9, 2.2],
                vec![14.0, 2.0, 31.0],
            ).unwrap();
            let sol = solve_scattering(&v, &Complex64::new(re, im)).unwrap();
            prop_assert!(sol.a_consistency() < 1e-11);
        }

        #[test]
        fn parity_relates_u_plus_minus(k in 0.3f64..20.0, x in -4.0f64..4.0) {
            let v = dw();
            let sol = solve_scattering(&v, &Complex64::new(k, 0.0)).unwrap();
            let here = sol.eigenfunction_at(x).unwrap();
            let there = sol.eigenfunction_at(-x).unwrap();
            let scale = here.u_plus.norm().max(1e-30);
            prop_assert!((here.u_minus - there.u_plus).norm() < 1e-10 * scale.max(1.0));
        }
    }
}
