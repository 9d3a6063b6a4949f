//! Two-way conversion between the natural units used throughout the library
//! (m = 1/2, hbar = 1, so H = -d²/dx² + V) and SI units.
//!
//! The scheme is fixed by a length scale `a0` and an energy scale `E1`:
//! x_SI = a0 x, k_SI = k/a0, E_SI = |E1| E, t_SI = (hbar/|E1|) t,
//! rate_SI = (|E1|/hbar) rate.

use thiserror::Error;

/// Reduced Planck constant, J·s (CODATA, 10 significant digits).
pub const HBAR: f64 = 1.054571817e-34;
/// One MeV in joules (exact by the SI definition of the electronvolt).
pub const MEV: f64 = 1.602176634e-13;

/// Default length scale in meters (alpha-particle/heavy-nucleus sizing).
pub const DEFAULT_A0_M: f64 = 7.2e-15;
/// Default energy scale in MeV.
pub const DEFAULT_E1_MEV: f64 = 0.1;
/// Default particle mass in kg (helium-4 nucleus).
pub const DEFAULT_MASS_KG: f64 = 6.69e-27;

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("length scale must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("energy scale must be positive, got {0}")]
    NonPositiveEnergy(f64),
    #[error("particle mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("scales are not self-consistent: hbar^2/(2 m a0^2) / |E1| = {0:.6}, need [0.98, 1.02]")]
    Inconsistent(f64),
}

/// Immutable unit scheme; safe to share across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitScheme {
    a0_m: f64,
    e1_joule: f64,
    mass_kg: f64,
}

impl UnitScheme {
    /// Build a scheme from a length scale (m), an energy scale (MeV) and a
    /// particle mass (kg). The three must satisfy
    /// hbar²/(2 m a0²) = |E1| within 2%, which is what makes the natural
    /// units (m = 1/2, hbar = 1) consistent.
    pub fn new(a0_m: f64, e1_mev: f64, mass_kg: f64) -> Result<Self, UnitError> {
        if !(a0_m > 0.0) {
            return Err(UnitError::NonPositiveLength(a0_m));
        }
        if !(e1_mev > 0.0) {
            return Err(UnitError::NonPositiveEnergy(e1_mev));
        }
        if !(mass_kg > 0.0) {
            return Err(UnitError::NonPositiveMass(mass_kg));
        }
        let scheme = UnitScheme { a0_m, e1_joule: e1_mev * MEV, mass_kg };
        let ratio = scheme.consistency_ratio();
        if !(0.98..=1.02).contains(&ratio) {
            return Err(UnitError::Inconsistent(ratio));
        }
        Ok(scheme)
    }

    /// hbar²/(2 m a0²) divided by the energy scale; 1 for perfectly
    /// consistent scales.
    pub fn consistency_ratio(&self) -> f64 {
        HBAR * HBAR / (2.0 * self.mass_kg * self.a0_m * self.a0_m) / self.e1_joule
    }

    pub fn a0_m(&self) -> f64 {
        self.a0_m
    }

    pub fn e1_joule(&self) -> f64 {
        self.e1_joule
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_kg
    }

    pub fn to_si_length(&self, x: f64) -> f64 {
        self.a0_m * x
    }
    pub fn from_si_length(&self, x_si: f64) -> f64 {
        x_si / self.a0_m
    }

    pub fn to_si_wavenumber(&self, k: f64) -> f64 {
        k / self.a0_m
    }
    pub fn from_si_wavenumber(&self, k_si: f64) -> f64 {
        k_si * self.a0_m
    }

    pub fn to_si_energy(&self, e: f64) -> f64 {
        self.e1_joule * e
    }
    pub fn from_si_energy(&self, e_si: f64) -> f64 {
        e_si / self.e1_joule
    }

    pub fn to_si_time(&self, t: f64) -> f64 {
        HBAR / self.e1_joule * t
    }
    pub fn from_si_time(&self, t_si: f64) -> f64 {
        t_si * self.e1_joule / HBAR
    }

    pub fn to_si_rate(&self, gamma: f64) -> f64 {
        self.e1_joule / HBAR * gamma
    }
    pub fn from_si_rate(&self, gamma_si: f64) -> f64 {
        gamma_si * HBAR / self.e1_joule
    }
}

impl Default for UnitScheme {
    fn default() -> Self {
        UnitScheme::new(DEFAULT_A0_M, DEFAULT_E1_MEV, DEFAULT_MASS_KG)
            .expect("default scales are consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_scheme_is_consistent() {
        let u = UnitScheme::default();
        let r = u.consistency_ratio();
        assert!((0.98..=1.02).contains(&r), "ratio {r}");
    }

    #[test]
    fn length_scale_example() {
        let u = UnitScheme::default();
        assert_eq!(u.to_si_length(1.0), 7.2e-15);
        assert_eq!(u.to_si_length(0.0), 0.0);
    }

    #[test]
    fn barrier_height_in_mev() {
        let u = UnitScheme::default();
        let si = u.to_si_energy(436.0);
        assert!((si / MEV - 43.6).abs() < 1e-12);
    }

    #[test]
    fn decay_rate_conversion_inverts_si_value() {
        // natural-unit rate recomputed from the SI value, then converted back
        let u = UnitScheme::default();
        let gamma_si = 1.3361e-13;
        let gamma_nat = u.from_si_rate(gamma_si);
        assert!((gamma_nat / 8.795e-34 - 1.0).abs() < 1e-3, "gamma_nat = {gamma_nat:e}");
        assert!((u.to_si_rate(gamma_nat) / gamma_si - 1.0).abs() < 1e-15);
        assert!((u.to_si_rate(8.795e-34) / 1.336e-13 - 1.0).abs() < 1e-3);
        assert_eq!(u.to_si_rate(0.0), 0.0);
    }

    #[test]
    fn rejects_inconsistent_scales() {
        assert!(matches!(
            UnitScheme::new(1e-14, 0.1, DEFAULT_MASS_KG),
            Err(UnitError::Inconsistent(_))
        ));
        assert!(matches!(
            UnitScheme::new(-1.0, 0.1, DEFAULT_MASS_KG),
            Err(UnitError::NonPositiveLength(_))
        ));
        assert!(matches!(
            UnitScheme::new(7.2e-15, 0.0, DEFAULT_MASS_KG),
            Err(UnitError::NonPositiveEnergy(_))
        ));
    }

    proptest! {
        // round trips for all five quantity kinds across extreme magnitudes
        #[test]
        fn round_trips(exp in -60.0f64..60.0, mantissa in 1.0f64..10.0, sign in prop::bool::ANY) {
            let v = if sign { mantissa } else { -mantissa } * 10f64.powf(exp);
            let u = UnitScheme::default();
            let checks = [
                u.from_si_length(u.to_si_length(v)),
                u.from_si_wavenumber(u.to_si_wavenumber(v)),
                u.from_si_energy(u.to_si_energy(v)),
                u.from_si_time(u.to_si_time(v)),
                u.from_si_rate(u.to_si_rate(v)),
            ];
            for c in checks {
                prop_assert!((c - v).abs() <= 1e-14 * v.abs());
            }
        }
    }
}
