//! Compactly supported piecewise-constant potentials on the line.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("breakpoints must be finite and strictly increasing")]
    BadBreakpoints,
    #[error("need heights.len() == breakpoints.len() - 1 (got {heights} heights, {breakpoints} breakpoints)")]
    LengthMismatch { heights: usize, breakpoints: usize },
    #[error("height {0} is not finite")]
    BadHeight(f64),
}

/// Structural tag for potentials built by the named constructors; closed-form
/// shortcuts exist for the double well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Free,
    Rectangular { ell: f64, lambda: f64 },
    DoubleWell { ell: f64, delta: f64, lambda: f64 },
    Custom,
}

/// V(x) constant on each interval between consecutive breakpoints and zero
/// outside them. Values at breakpoints are taken right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePotential {
    breakpoints: Vec<f64>,
    heights: Vec<f64>,
    shape: Shape,
}

impl PiecewisePotential {
    /// The zero potential.
    pub fn free() -> Self {
        PiecewisePotential { breakpoints: vec![], heights: vec![], shape: Shape::Free }
    }

    /// Two barriers of height `lambda` on [-(ell+delta), -ell] and [ell, ell+delta].
    pub fn double_well(ell: f64, delta: f64, lambda: f64) -> Result<Self, PotentialError> {
        for (name, value) in [("ell", ell), ("delta", delta), ("lambda", lambda)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PotentialError::NonPositive { name, value });
            }
        }
        Ok(PiecewisePotential {
            breakpoints: vec![-(ell + delta), -ell, ell, ell + delta],
            heights: vec![lambda, 0.0, lambda],
            shape: Shape::DoubleWell { ell, delta, lambda },
        })
    }

    /// A single step of height `lambda` on [-ell, ell].
    pub fn rectangular(ell: f64, lambda: f64) -> Result<Self, PotentialError> {
        for (name, value) in [("ell", ell), ("lambda", lambda)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PotentialError::NonPositive { name, value });
            }
        }
        Ok(PiecewisePotential {
            breakpoints: vec![-ell, ell],
            heights: vec![lambda],
            shape: Shape::Rectangular { ell, lambda },
        })
    }

    /// A rectangular well of depth `depth` (> 0) on [-ell, ell]; supports
    /// bound states, which the expansion machinery does not cover. Intended
    /// for the bound-state diagnostic.
    pub fn rectangular_well(ell: f64, depth: f64) -> Result<Self, PotentialError> {
        for (name, value) in [("ell", ell), ("depth", depth)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PotentialError::NonPositive { name, value });
            }
        }
        Ok(PiecewisePotential {
            breakpoints: vec![-ell, ell],
            heights: vec![-depth],
            shape: Shape::Custom,
        })
    }

    pub fn from_breakpoints(breakpoints: Vec<f64>, heights: Vec<f64>) -> Result<Self, PotentialError> {
        if breakpoints.len() < 2 || breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(PotentialError::BadBreakpoints);
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PotentialError::BadBreakpoints);
        }
        if heights.len() + 1 != breakpoints.len() {
            return Err(PotentialError::LengthMismatch {
                heights: heights.len(),
                breakpoints: breakpoints.len(),
            });
        }
        if let Some(&h) = heights.iter().find(|h| !h.is_finite()) {
            return Err(PotentialError::BadHeight(h));
        }
        Ok(PiecewisePotential { breakpoints, heights, shape: Shape::Custom })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Half-width L of the support: V = 0 outside [-L, L].
    pub fn half_support(&self) -> f64 {
        match (self.breakpoints.first(), self.breakpoints.last()) {
            (Some(&a), Some(&b)) => a.abs().max(b.abs()),
            _ => 0.0,
        }
    }

    /// Half-width of the inner flat region for barrier-type shapes, used as
    /// the default truncation window; falls back to the full support.
    pub fn inner_half_width(&self) -> f64 {
        match self.shape {
            Shape::DoubleWell { ell, .. } | Shape::Rectangular { ell, .. } => ell,
            _ => self.half_support(),
        }
    }

    /// Right-continuous pointwise evaluation.
    pub fn evaluate(&self, x: f64) -> f64 {
        if self.breakpoints.is_empty() {
            return 0.0;
        }
        // index of the region [b[i], b[i+1]) containing x
        let n = self.breakpoints.len();
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        if idx == 0 || idx == n {
            0.0
        } else {
            self.heights[idx - 1]
        }
    }

    /// Mean of V over [lo, hi]; exact for piecewise-constant V.
    pub fn cell_average(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return self.evaluate(lo);
        }
        let mut acc = 0.0;
        for (j, &h) in self.heights.iter().enumerate() {
            let a = self.breakpoints[j].max(lo);
            let b = self.breakpoints[j + 1].min(hi);
            if b > a {
                acc += h * (b - a);
            }
        }
        acc / (hi - lo)
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::min)
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::max)
    }
}
