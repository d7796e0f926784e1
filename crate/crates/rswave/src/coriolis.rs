//! Rotation (Coriolis) profiles `b(x₂)` with hand-coded derivatives.

use serde::{Deserialize, Serialize};

/// Tolerance below which `b′` counts as critical in profile validation.
const TOL_CRIT: f64 = 1e-6;
/// Non-degeneracy floor for `b″` at critical points.
const TOL_NONDEGEN: f64 = 1e-8;

/// The rotation profile entering the skew block of the propagator.
///
/// `Betaplane` is `b(x₂) = b₀ + β·x₂`; the `β = 0, b₀ ≠ 0` case is the
/// constant-rotation control used by exactness tests. `Monotone` is the
/// built-in non-linear profile `b(x₂) = β·x₂ + α·atan(γ·x₂)`, strictly
/// increasing for `β > 0` and `α·γ > −β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoriolisProfile {
    Betaplane {
        beta: f64,
        #[serde(default)]
        b0: f64,
    },
    Monotone {
        beta: f64,
        alpha: f64,
        gamma: f64,
    },
}

impl CoriolisProfile {
    pub fn betaplane(beta: f64) -> Self {
        CoriolisProfile::Betaplane { beta, b0: 0.0 }
    }

    pub fn constant(b0: f64) -> Self {
        CoriolisProfile::Betaplane { beta: 0.0, b0 }
    }

    pub fn monotone(beta: f64, alpha: f64, gamma: f64) -> Self {
        CoriolisProfile::Monotone { beta, alpha, gamma }
    }

    pub fn b(&self, x2: f64) -> f64 {
        match *self {
            CoriolisProfile::Betaplane { beta, b0 } => b0 + beta * x2,
            CoriolisProfile::Monotone { beta, alpha, gamma } => {
                beta * x2 + alpha * (gamma * x2).atan()
            }
        }
    }

    pub fn db(&self, x2: f64) -> f64 {
        match *self {
            CoriolisProfile::Betaplane { beta, .. } => beta,
            CoriolisProfile::Monotone { beta, alpha, gamma } => {
                let d = 1.0 + gamma * gamma * x2 * x2;
                beta + alpha * gamma / d
            }
        }
    }

    pub fn d2b(&self, x2: f64) -> f64 {
        match *self {
            CoriolisProfile::Betaplane { .. } => 0.0,
            CoriolisProfile::Monotone { beta: _, alpha, gamma } => {
                let d = 1.0 + gamma * gamma * x2 * x2;
                -2.0 * alpha * gamma.powi(3) * x2 / (d * d)
            }
        }
    }

    /// A constant profile (`β = 0`) has no latitude dependence; several
    /// exactness controls rely on this case.
    pub fn is_constant(&self) -> bool {
        matches!(self, CoriolisProfile::Betaplane { beta, .. } if *beta == 0.0)
    }

    /// Check monotonicity-at-infinity and non-degeneracy of critical points
    /// on `[-domain, domain]`, sampled at `samples` points.
    ///
    /// The constant control profile is exempt from the monotonicity
    /// requirement; it must then have `b₀ ≠ 0` to keep the gap open.
    pub fn validate(&self, domain: f64, samples: usize) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if let CoriolisProfile::Betaplane { beta, b0 } = self {
            if *beta == 0.0 {
                if *b0 == 0.0 {
                    errors.push("constant profile needs b0 != 0".to_string());
                }
                return if errors.is_empty() { Ok(()) } else { Err(errors) };
            }
        }
        let n = samples.max(16);
        for i in 0..=n {
            let x2 = -domain + 2.0 * domain * (i as f64) / (n as f64);
            let d1 = self.db(x2);
            // Increasing outside a bounded interval: enforce on the outer half.
            if x2.abs() >= 0.5 * domain && d1 <= 0.0 {
                errors.push(format!("b'({x2}) = {d1} <= 0 in the outer domain"));
            }
            if d1.abs() < TOL_CRIT && self.d2b(x2).abs() <= TOL_NONDEGEN {
                errors.push(format!("degenerate critical point of b near x2 = {x2}"));
            }
        }
        errors.dedup();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn betaplane_derivatives() {
        let p = CoriolisProfile::betaplane(1.5);
        assert_eq!(p.b(2.0), 3.0);
        assert_eq!(p.db(-7.0), 1.5);
        assert_eq!(p.d2b(0.3), 0.0);
    }

    #[test]
    fn monotone_derivatives_match_finite_differences() {
        let p = CoriolisProfile::monotone(1.0, 0.3, 0.7);
        let h = 1e-5;
        for &x2 in &[-2.0, -0.4, 0.0, 0.9, 3.7] {
            let fd1 = (p.b(x2 + h) - p.b(x2 - h)) / (2.0 * h);
            let fd2 = (p.db(x2 + h) - p.db(x2 - h)) / (2.0 * h);
            assert!((fd1 - p.db(x2)).abs() < 1e-9, "b' mismatch at {x2}");
            assert!((fd2 - p.d2b(x2)).abs() < 1e-9, "b'' mismatch at {x2}");
        }
    }

    #[test]
    fn validation_accepts_builtin_profiles() {
        CoriolisProfile::betaplane(1.0).validate(8.0, 256).unwrap();
        CoriolisProfile::monotone(1.0, 0.3, 0.7).validate(8.0, 256).unwrap();
        CoriolisProfile::constant(2.0).validate(8.0, 256).unwrap();
    }

    #[test]
    fn validation_rejects_decreasing_and_zero_profiles() {
        assert!(CoriolisProfile::betaplane(-1.0).validate(8.0, 256).is_err());
        assert!(CoriolisProfile::constant(0.0).validate(8.0, 256).is_err());
    }
}
