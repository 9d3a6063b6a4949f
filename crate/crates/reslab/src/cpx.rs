//! Complex scalar abstraction over `f64` complex numbers and arbitrary-precision
//! complex numbers, so the scattering kernels can run at either precision.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use rug::ops::CompleteRound;
use rug::{Complex, Float};

/// Working precision selector for operations that may need more than 64-bit
/// floats (narrow resonances sit exponentially close to the real axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Double,
    /// Decimal digits of working precision.
    Extended(u32),
}

impl Precision {
    /// Decimal digits carried by this precision level.
    pub fn digits(self) -> u32 {
        match self {
            Precision::Double => 15,
            Precision::Extended(d) => d.max(15),
        }
    }

    /// Binary precision for the extended backend.
    pub fn bits(self) -> u32 {
        // log2(10) with headroom for intermediate roundoff
        (self.digits() as f64 * 3.321928094887362).ceil() as u32 + 24
    }
}

/// Complex scalar with the elementary functions the transfer-matrix and
/// closed-form kernels need. Implemented for `Complex64` and [`MpComplex`].
///
/// Constructors are value-relative (`embed`) so precision propagates from the
/// wavenumber the caller supplies.
pub trait ComplexField:
    Clone
    + Sized
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A value `re + i*im` at the same working precision as `self`.
    fn embed(&self, re: f64, im: f64) -> Self;
    fn re_f64(&self) -> f64;
    fn im_f64(&self) -> f64;
    /// |z| rounded to f64; may over/underflow for extreme magnitudes.
    fn abs_f64(&self) -> f64;
    fn scale(&self, s: f64) -> Self;
    fn mul_i(&self) -> Self;
    fn conj(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn is_finite(&self) -> bool;

    fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re_f64(), self.im_f64())
    }
}

impl ComplexField for Complex64 {
    fn embed(&self, re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn re_f64(&self) -> f64 {
        self.re
    }
    fn im_f64(&self) -> f64 {
        self.im
    }
    fn abs_f64(&self) -> f64 {
        self.norm()
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn mul_i(&self) -> Self {
        Complex64::new(-self.im, self.re)
    }
    fn conj(&self) -> Self {
        Complex64::new(self.re, -self.im)
    }
    fn sqrt(&self) -> Self {
        num_complex::Complex::sqrt(*self)
    }
    fn exp(&self) -> Self {
        num_complex::Complex::exp(*self)
    }
    fn sin(&self) -> Self {
        num_complex::Complex::sin(*self)
    }
    fn cos(&self) -> Self {
        num_complex::Complex::cos(*self)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Arbitrary-precision complex number (MPC-backed) carrying its precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MpComplex(pub Complex);

impl MpComplex {
    pub fn with_digits(digits: u32, re: f64, im: f64) -> Self {
        let bits = Precision::Extended(digits).bits();
        MpComplex(Complex::with_val(bits, (re, im)))
    }

    pub fn with_bits(bits: u32, re: f64, im: f64) -> Self {
        MpComplex(Complex::with_val(bits, (re, im)))
    }

    pub fn prec(&self) -> u32 {
        self.0.prec().0
    }

    pub fn inner(&self) -> &Complex {
        &self.0
    }

    /// Real part as an exact `Float` copy.
    pub fn re_float(&self) -> Float {
        self.0.real().clone()
    }

    pub fn im_float(&self) -> Float {
        self.0.imag().clone()
    }
}

impl Add for MpComplex {
    type Output = MpComplex;
    fn add(self, rhs: MpComplex) -> MpComplex {
        MpComplex(self.0 + rhs.0)
    }
}

impl Sub for MpComplex {
    type Output = MpComplex;
    fn sub(self, rhs: MpComplex) -> MpComplex {
        MpComplex(self.0 - rhs.0)
    }
}

impl Mul for MpComplex {
    type Output = MpComplex;
    fn mul(self, rhs: MpComplex) -> MpComplex {
        MpComplex(self.0 * rhs.0)
    }
}

impl Div for MpComplex {
    type Output = MpComplex;
    fn div(self, rhs: MpComplex) -> MpComplex {
        MpComplex(self.0 / rhs.0)
    }
}

impl Neg for MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex(-self.0)
    }
}

impl ComplexField for MpComplex {
    fn embed(&self, re: f64, im: f64) -> Self {
        MpComplex(Complex::with_val(self.prec(), (re, im)))
    }
    fn re_f64(&self) -> f64 {
        self.0.real().to_f64()
    }
    fn im_f64(&self) -> f64 {
        self.0.imag().to_f64()
    }
    fn abs_f64(&self) -> f64 {
        self.0.abs_ref().complete((self.prec(), self.prec())).real().to_f64()
    }
    fn scale(&self, s: f64) -> Self {
        MpComplex(self.0.clone() * Float::with_val(self.prec(), s))
    }
    fn mul_i(&self) -> Self {
        MpComplex(self.0.clone().mul_i(false))
    }
    fn conj(&self) -> Self {
        MpComplex(self.0.clone().conj())
    }
    fn sqrt(&self) -> Self {
        MpComplex(self.0.clone().sqrt())
    }
    fn exp(&self) -> Self {
        MpComplex(self.0.clone().exp())
    }
    fn sin(&self) -> Self {
        MpComplex(self.0.clone().sin())
    }
    fn cos(&self) -> Self {
        MpComplex(self.0.clone().cos())
    }
    fn is_finite(&self) -> bool {
        self.0.real().is_finite() && self.0.imag().is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mp_matches_f64_on_elementary_functions() {
        let zf = Complex64::new(0.7, -1.3);
        let zm = MpComplex::with_digits(40, 0.7, -1.3);
        for (a, b) in [
            (zf.sqrt(), ComplexField::sqrt(&zm)),
            (zf.exp(), ComplexField::exp(&zm)),
            (ComplexField::sin(&zf), ComplexField::sin(&zm)),
            (ComplexField::cos(&zf), ComplexField::cos(&zm)),
            (zf.mul_i(), zm.mul_i()),
        ] {
            assert!((a - b.to_c64()).norm() < 1e-14 * a.norm().max(1.0));
        }
    }

    #[test]
    fn precision_digit_floor() {
        assert_eq!(Precision::Double.digits(), 15);
        assert_eq!(Precision::Extended(50).digits(), 50);
        assert_eq!(Precision::Extended(4).digits(), 15);
        assert!(Precision::Extended(50).bits() > 166);
    }
}
