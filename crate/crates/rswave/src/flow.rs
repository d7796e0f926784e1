//! Divergence-free, compactly supported background flows.

use serde::{Deserialize, Serialize};

/// First partial derivatives of the flow, `d[i][j] = ∂ᵢūⱼ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowGradient {
    pub d: [[f64; 2]; 2],
}

impl FlowGradient {
    pub fn divergence(&self) -> f64 {
        self.d[0][0] + self.d[1][1]
    }
}

/// Stationary background flow `ū(x)`.
///
/// The built-in `Bump` flow is `ū = ∇⊥ψ` for the stream function
/// `ψ = A·exp(−1/(1 − r²/R²))` inside the disk of radius `R` around
/// `center` and zero outside, so it is divergence-free and exactly
/// compactly supported by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundFlow {
    Zero,
    Bump {
        amplitude: f64,
        support_radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

impl BackgroundFlow {
    pub fn zero() -> Self {
        BackgroundFlow::Zero
    }

    pub fn bump(amplitude: f64, support_radius: f64) -> Self {
        BackgroundFlow::Bump {
            amplitude,
            support_radius,
            center: [0.0, 0.0],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BackgroundFlow::Zero)
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            BackgroundFlow::Zero => 0.0,
            BackgroundFlow::Bump { support_radius, .. } => support_radius,
        }
    }

    /// Velocity `(ū₁, ū₂)` at `x`.
    pub fn u(&self, x1: f64, x2: f64) -> (f64, f64) {
        match *self {
            BackgroundFlow::Zero => (0.0, 0.0),
            BackgroundFlow::Bump {
                amplitude,
                support_radius,
                center,
            } => {
                let (y1, y2) = (x1 - center[0], x2 - center[1]);
                let rho = (y1 * y1 + y2 * y2) / (support_radius * support_radius);
                if rho >= 1.0 {
                    return (0.0, 0.0);
                }
                let e = amplitude * (-1.0 / (1.0 - rho)).exp();
                let gp = -1.0 / ((1.0 - rho) * (1.0 - rho));
                let scale = 2.0 / (support_radius * support_radius);
                // ū = (−∂₂ψ, ∂₁ψ)
                (-e * gp * scale * y2, e * gp * scale * y1)
            }
        }
    }

    /// First partial derivatives `∂ᵢūⱼ` at `x`.
    pub fn grad(&self, x1: f64, x2: f64) -> FlowGradient {
        match *self {
            BackgroundFlow::Zero => FlowGradient::default(),
            BackgroundFlow::Bump {
                amplitude,
                support_radius,
                center,
            } => {
                let (y1, y2) = (x1 - center[0], x2 - center[1]);
                let r2 = support_radius * support_radius;
                let rho = (y1 * y1 + y2 * y2) / r2;
                if rho >= 1.0 {
                    return FlowGradient::default();
                }
                let om = 1.0 - rho;
                let e = amplitude * (-1.0 / om).exp();
                let gp = -1.0 / (om * om);
                let gpp = -2.0 / (om * om * om);
                let s = 2.0 / r2;
                let (r1v, r2v) = (s * y1, s * y2); // ∂ᵢρ
                let coef = gp * gp + gpp;
                // ∂ᵢ∂ⱼψ = e·[coef·∂ᵢρ·∂ⱼρ + gp·s·δᵢⱼ]
                let p11 = e * (coef * r1v * r1v + gp * s);
                let p12 = e * coef * r1v * r2v;
                let p22 = e * (coef * r2v * r2v + gp * s);
                FlowGradient {
                    d: [[-p12, p11], [-p22, p12]],
                }
            }
        }
    }

    /// ū·ξ at a phase point.
    pub fn dot_xi(&self, x1: f64, x2: f64, xi1: f64, xi2: f64) -> f64 {
        let (u1, u2) = self.u(x1, x2);
        u1 * xi1 + u2 * xi2
    }

    /// Check exact compact support and pointwise divergence-freeness on a
    /// sample of points within `[-domain, domain]²`.
    pub fn validate(&self, domain: f64, samples: usize) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let n = samples.max(8);
        for i in 0..=n {
            for j in 0..=n {
                let x1 = -domain + 2.0 * domain * (i as f64) / (n as f64);
                let x2 = -domain + 2.0 * domain * (j as f64) / (n as f64);
                let (u1, u2) = self.u(x1, x2);
                let g = self.grad(x1, x2);
                if g.divergence().abs() > 1e-10 {
                    errors.push(format!("divergence {:.3e} at ({x1}, {x2})", g.divergence()));
                }
                if let BackgroundFlow::Bump {
                    support_radius,
                    center,
                    ..
                } = self
                {
                    let r = ((x1 - center[0]).powi(2) + (x2 - center[1]).powi(2)).sqrt();
                    if r > *support_radius && (u1 != 0.0 || u2 != 0.0) {
                        errors.push(format!("flow not zero outside support at ({x1}, {x2})"));
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}
