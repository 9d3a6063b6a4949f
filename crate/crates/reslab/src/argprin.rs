//! Zero counting for analytic functions by tracking the winding of f along a
//! rectangle boundary. Used as an independent verification pass on resonance
//! roots, not as the locator.

use thiserror::Error;

use crate::cpx::ComplexField;

#[derive(Debug, Error, PartialEq)]
pub enum ArgPrincipleError {
    #[error("f vanished (or lost all precision) on the contour")]
    ZeroOnContour,
    #[error("phase could not be resolved below pi/2 after {0} refinement levels")]
    UnresolvedPhase(usize),
    #[error("accumulated winding {0} is not close to an integer multiple of 2 pi")]
    NonIntegerWinding(f64),
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy)]
pub struct Rectangle {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

const MAX_DEPTH: usize = 48;

fn phase_between<C: ComplexField>(a: &C, b: &C) -> f64 {
    // arg(b/a) in (-pi, pi], computed in f64 from the ratio
    let r = (b.clone() / a.clone()).to_c64();
    r.arg()
}

/// Counts zeros (with multiplicity) of `f` inside `rect`, assuming f is
/// analytic on and inside the contour with no poles. The boundary is walked
/// counterclockwise; segments are bisected until each phase increment is
/// below pi/2, which makes the accumulated winding unambiguous.
///
/// `template` fixes the working precision of the boundary points.
pub fn count_zeros_rectangle<C, F>(
    f: F,
    rect: Rectangle,
    template: &C,
    samples_per_edge: usize,
) -> Result<i64, ArgPrincipleError>
where
    C: ComplexField,
    F: Fn(&C) -> C,
{
    let corners = [
        (rect.re_lo, rect.im_lo),
        (rect.re_hi, rect.im_lo),
        (rect.re_hi, rect.im_hi),
        (rect.re_lo, rect.im_hi),
        (rect.re_lo, rect.im_lo),
    ];
    let n = samples_per_edge.max(2);
    let mut total = 0.0_f64;

    for edge in 0..4 {
        let (x0, y0) = corners[edge];
        let (x1, y1) = corners[edge + 1];
        let point = |s: f64| -> C { template.embed(x0 + (x1 - x0) * s, y0 + (y1 - y0) * s) };
        let mut prev_s = 0.0;
        let mut prev_f = f(&point(0.0));
        if prev_f.abs_f64() == 0.0 {
            return Err(ArgPrincipleError::ZeroOnContour);
        }
        for i in 1..=n {
            let s = i as f64 / n as f64;
            let cur_f = f(&point(s));
            if cur_f.abs_f64() == 0.0 {
                return Err(ArgPrincipleError::ZeroOnContour);
            }
            total += refine_segment(&f, &point, prev_s, &prev_f, s, &cur_f, 0)?;
            prev_s = s;
            prev_f = cur_f;
        }
    }

    let winding = total / (2.0 * std::f64::consts::PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.25 {
        return Err(ArgPrincipleError::NonIntegerWinding(winding));
    }
    Ok(rounded as i64)
}

fn refine_segment<C, F, P>(
    f: &F,
    point: &P,
    s0: f64,
    f0: &C,
    s1: f64,
    f1: &C,
    depth: usize,
) -> Result<f64, ArgPrincipleError>
where
    C: ComplexField,
    F: Fn(&C) -> C,
    P: Fn(f64) -> C,
{
    let d = phase_between(f0, f1);
    if d.abs() < std::f64::consts::FRAC_PI_2 {
        return Ok(d);
    }
    if depth >= MAX_DEPTH {
        return Err(ArgPrincipleError::UnresolvedPhase(depth));
    }
    let sm = 0.5 * (s0 + s1);
    let fm = f(&point(sm));
    if fm.abs_f64() == 0.0 {
        return Err(ArgPrincipleError::ZeroOnContour);
    }
    Ok(refine_segment(f, point, s0, f0, sm, &fm, depth + 1)?
        + refine_segment(f, point, sm, &fm, s1, f1, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn counts_roots_of_polynomial() {
        // (z - (1 - 0.5i)) (z - (2 + 0.25i)) (z + 1)
        let roots = [
            Complex64::new(1.0, -0.5),
            Complex64::new(2.0, 0.25),
            Complex64::new(-1.0, 0.0),
        ];
        let f = |z: &Complex64| roots.iter().fold(Complex64::new(1.0, 0.0), |acc, r| acc * (z - r));
        let t = Complex64::new(0.0, 0.0);
        let all = Rectangle { re_lo: -2.0, re_hi: 3.0, im_lo: -1.0, im_hi: 1.0 };
        assert_eq!(count_zeros_rectangle(f, all, &t, 16).unwrap(), 3);
        let lower = Rectangle { re_lo: 0.0, re_hi: 3.0, im_lo: -1.0, im_hi: 0.0 };
        assert_eq!(count_zeros_rectangle(f, lower, &t, 16).unwrap(), 1);
        let empty = Rectangle { re_lo: 5.0, re_hi: 6.0, im_lo: -1.0, im_hi: 1.0 };
        assert_eq!(count_zeros_rectangle(f, empty, &t, 16).unwrap(), 0);
    }

    #[test]
    fn counts_double_root() {
        let f = |z: &Complex64| (z - Complex64::new(0.3, -0.1)).powi(2);
        let rect = Rectangle { re_lo: 0.0, re_hi: 1.0, im_lo: -0.5, im_hi: 0.25 };
        assert_eq!(count_zeros_rectangle(f, rect, &Complex64::new(0.0, 0.0), 8).unwrap(), 2);
    }

    #[test]
    fn essential_zero_on_contour_detected() {
        let f = |z: &Complex64| *z;
        let rect = Rectangle { re_lo: 0.0, re_hi: 1.0, im_lo: -0.5, im_hi: 0.5 };
        // z = 0 sits exactly on the left edge
        let r = count_zeros_rectangle(f, rect, &Complex64::new(0.0, 0.0), 4);
        assert!(matches!(r, Err(ArgPrincipleError::ZeroOnContour) | Err(ArgPrincipleError::UnresolvedPhase(_))));
    }
}
