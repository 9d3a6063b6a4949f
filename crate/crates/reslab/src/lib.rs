//! Resonances, Gamow functions and exact spectral time evolution for 1D
//! Schrödinger operators H = -d²/dx² + V with compactly supported
//! piecewise-constant potentials (natural units m = 1/2, hbar = 1).
//!
//! The pipeline: build a potential, solve the scattering problem with the
//! outgoing normalization c± = 1, locate resonances as lower-half-plane zeros
//! of a(k), build the associated Gamow functions, expand square-integrable
//! initial states in the normalized generalized eigenfunctions u±, and evolve
//! them exactly via the spectral phase e^{-ik²t}. A Crank–Nicolson grid
//! propagator provides an independent cross-check, and a Breit–Wigner pole
//! approximation reproduces the exponential decay law for comparison.

pub mod argprin;
pub mod cpx;
pub mod fit;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod resonance;
pub mod scattering;
pub mod spectral;
pub mod threads;
pub mod units;

pub use cpx::{ComplexField, MpComplex, Precision};
pub use potential::{PiecewisePotential, PotentialError, Shape};
pub use resonance::{
    decay_rate_si, find_resonances, gamow_from_resonance, verify_simple_root, Channel,
    GamowFunction, Resonance, ResonanceError, TruncatedGamow,
};
pub use scattering::{
    bound_state_diagnostic, closed_form_double_well, solve_scattering, ScatteringError,
    ScatteringSolution,
};
pub use spectral::{
    evolve, forward_transform, inverse_transform, EvolutionResult, PoleApproximation,
    SampledFunction, SpectralCoefficients, SpectralError, TransformOptions, WaveFunction,
};
pub use units::{UnitError, UnitScheme};
