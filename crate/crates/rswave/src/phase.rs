//! Phase-space points of the two-dimensional wave problem.

use serde::{Deserialize, Serialize};

/// A point `(x₁, x₂, ξ₁, ξ₂)` of phase space. `x₁` is the longitude-like
/// coordinate, `x₂` the latitude-like one; `ξ` is the dual (frequency)
/// variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x1: f64,
    pub x2: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl PhasePoint {
    pub fn new(x1: f64, x2: f64, xi1: f64, xi2: f64) -> Self {
        Self { x1, x2, xi1, xi2 }
    }

    pub fn xi_norm_sqr(&self) -> f64 {
        self.xi1 * self.xi1 + self.xi2 * self.xi2
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.xi1.is_finite() && self.xi2.is_finite()
    }
}

/// The four phase-space directions, used to index partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseVar {
    X1,
    X2,
    Xi1,
    Xi2,
}

impl PhaseVar {
    pub const ALL: [PhaseVar; 4] = [PhaseVar::X1, PhaseVar::X2, PhaseVar::Xi1, PhaseVar::Xi2];

    /// Shift `p` by `h` along this direction.
    pub fn shift(&self, p: PhasePoint, h: f64) -> PhasePoint {
        let mut q = p;
        match self {
            PhaseVar::X1 => q.x1 += h,
            PhaseVar::X2 => q.x2 += h,
            PhaseVar::Xi1 => q.xi1 += h,
            PhaseVar::Xi2 => q.xi2 += h,
        }
        q
    }
}
