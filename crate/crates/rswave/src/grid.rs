//! Periodic spatial grid, frequency bookkeeping and 2-D FFT helpers.
//!
//! The box is `[−L₁, L₁) × [−L₂, L₂)` with `n₁ × n₂` points (powers of two).
//! Grid functions are stored row-major, index `a₁·n₂ + a₂`. Plane waves are
//! written `e^{i k·x}` with `k = (π m₁/L₁, π m₂/L₂)` and canonical mode
//! numbers `m ∈ [−n/2, n/2)`; the ε-scaled momentum of mode `m` is
//! `ξ = ε·k`.

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub n1: usize,
    pub n2: usize,
    pub l1: f64,
    pub l2: f64,
}

/// Grid sizes must be even (the midpoint classes pair up per axis) and
/// FFT-friendly (factors 2, 3, 5 only).
pub fn valid_axis_size(n: usize) -> bool {
    if n < 8 || n % 2 != 0 {
        return false;
    }
    let mut m = n;
    for p in [2usize, 3, 5] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}

impl SpatialGrid {
    pub fn new(n1: usize, n2: usize, l1: f64, l2: f64) -> Self {
        assert!(valid_axis_size(n1), "n1 must be even, >= 8, with factors 2/3/5");
        assert!(
            n2 == 1 || valid_axis_size(n2),
            "n2 must be even, >= 8, with factors 2/3/5 (or 1 for a line grid)"
        );
        assert!(l1 > 0.0 && l2 > 0.0);
        Self { n1, n2, l1, l2 }
    }

    pub fn square(n: usize, l: f64) -> Self {
        Self::new(n, n, l, l)
    }

    /// One-dimensional reduction grid: a single row in `x₂` with unit cell
    /// weight in that direction.
    pub fn line(n1: usize, l1: f64) -> Self {
        Self::new(n1, 1, l1, 0.5)
    }

    pub fn npoints(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn h1(&self) -> f64 {
        2.0 * self.l1 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        2.0 * self.l2 / self.n2 as f64
    }

    /// Cell area.
    pub fn weight(&self) -> f64 {
        self.h1() * self.h2()
    }

    pub fn x1(&self, a1: usize) -> f64 {
        -self.l1 + self.h1() * a1 as f64
    }

    pub fn x2(&self, a2: usize) -> f64 {
        -self.l2 + self.h2() * a2 as f64
    }

    pub fn idx(&self, a1: usize, a2: usize) -> usize {
        a1 * self.n2 + a2
    }

    /// Canonical mode number for a storage index along an axis of size `n`.
    pub fn mode(i: usize, n: usize) -> i64 {
        if i < n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn k1(&self, i: usize) -> f64 {
        std::f64::consts::PI * Self::mode(i, self.n1) as f64 / self.l1
    }

    pub fn k2(&self, j: usize) -> f64 {
        std::f64::consts::PI * Self::mode(j, self.n2) as f64 / self.l2
    }

    /// Largest representable `|k|` per axis.
    pub fn nyquist_k1(&self) -> f64 {
        std::f64::consts::PI * (self.n1 / 2) as f64 / self.l1
    }

    pub fn nyquist_k2(&self) -> f64 {
        std::f64::consts::PI * (self.n2 / 2) as f64 / self.l2
    }
}

/// Cached FFT plans for one grid, with mode-coefficient conversions.
pub struct FftCtx {
    pub grid: SpatialGrid,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl FftCtx {
    pub fn new(grid: SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        FftCtx {
            grid,
            fwd1: planner.plan_fft_forward(grid.n1),
            inv1: planner.plan_fft_inverse(grid.n1),
            fwd2: planner.plan_fft_forward(grid.n2),
            inv2: planner.plan_fft_inverse(grid.n2),
        }
    }

    fn transform(&self, data: &mut [C64], forward: bool) {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        assert_eq!(data.len(), n1 * n2);
        let plan2 = if forward { &self.fwd2 } else { &self.inv2 };
        for row in data.chunks_exact_mut(n2) {
            plan2.process(row);
        }
        let plan1 = if forward { &self.fwd1 } else { &self.inv1 };
        let mut col = vec![C64::ZERO; n1];
        for j in 0..n2 {
            for i in 0..n1 {
                col[i] = data[i * n2 + j];
            }
            plan1.process(&mut col);
            for i in 0..n1 {
                data[i * n2 + j] = col[i];
            }
        }
    }

    /// Unnormalized forward transform `Σ_a f(a) e^{−2πi a·m̃/n}`.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, true);
    }

    /// Unnormalized inverse transform `Σ_m̃ g(m̃) e^{+2πi a·m̃/n}`.
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, false);
    }

    /// Convert grid samples to plane-wave coefficients: afterwards
    /// `f(x_a) = Σ_m data[m̃] e^{i k_m · x_a}`.
    pub fn to_modes(&self, data: &mut [C64]) {
        self.forward(data);
        let norm = 1.0 / self.grid.npoints() as f64;
        self.apply_center_phase(data, norm);
    }

    /// Inverse of [`FftCtx::to_modes`].
    pub fn from_modes(&self, data: &mut [C64]) {
        self.apply_center_phase(data, 1.0);
        self.inverse(data);
    }

    /// Multiply entry `m̃` by `s·(−1)^{m₁+m₂}` (the phase between the
    /// box-centered coordinates and DFT index conventions).
    fn apply_center_phase(&self, data: &mut [C64], s: f64) {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        for i in 0..n1 {
            let m1 = SpatialGrid::mode(i, n1);
            for j in 0..n2 {
                let m2 = SpatialGrid::mode(j, n2);
                let sign = if (m1 + m2) & 1 == 0 { s } else { -s };
                data[i * n2 + j] *= sign;
            }
        }
    }
}
