//! Gaussian and band-limited test states.

use crate::grid::{FftCtx, SpatialGrid};
use num_complex::Complex64 as C64;

/// Normalized scalar Gaussian wave packet
/// `exp(−|x−x⁰|²/(2ε))·exp(i ξ⁰·x/ε)` sampled on the grid.
pub fn gaussian_scalar(grid: SpatialGrid, eps: f64, center: crate::PhasePoint) -> Vec<C64> {
    gaussian_scalar_aniso(grid, eps, center, 1.0)
}

/// Gaussian packet squeezed in `x₂` by the factor `phi2 ≥ 1` (and
/// correspondingly widened in `ξ₂`): the envelope is
/// `exp(−[(x₁−x₁⁰)² + phi2²(x₂−x₂⁰)²]/(2ε))`.
pub fn gaussian_scalar_aniso(
    grid: SpatialGrid,
    eps: f64,
    center: crate::PhasePoint,
    phi2: f64,
) -> Vec<C64> {
    let mut out = vec![C64::ZERO; grid.npoints()];
    let p2 = phi2 * phi2;
    for a1 in 0..grid.n1 {
        let x1 = grid.x1(a1);
        for a2 in 0..grid.n2 {
            let x2 = grid.x2(a2);
            let d2 = (x1 - center.x1).powi(2) + p2 * (x2 - center.x2).powi(2);
            let amp = (-d2 / (2.0 * eps)).exp();
            let phase = (center.xi1 * x1 + center.xi2 * x2) / eps;
            out[grid.idx(a1, a2)] = C64::new(phase.cos(), phase.sin()) * amp;
        }
    }
    normalize(grid, &mut out);
    out
}

/// Distance from a point to the nearest box wall.
pub fn wall_clearance(grid: SpatialGrid, x1: f64, x2: f64) -> f64 {
    let d1 = (grid.l1 - x1).min(x1 + grid.l1);
    let d2 = (grid.l2 - x2).min(x2 + grid.l2);
    d1.min(d2)
}

/// C∞ bump `exp(−1/(1−u²))` on `(−1, 1)`, zero outside.
pub fn smooth_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// A state assembled directly in mode space: amplitude
/// `bump((k₁−k_c)/w)` on the axis-1 frequency window, centered in space at
/// `x_center`. Exactly band-limited, with superpolynomially small spatial
/// tails; used by the commutator positivity checks.
pub fn mode_bump_state(
    grid: SpatialGrid,
    k_center: f64,
    k_halfwidth: f64,
    x_center: f64,
) -> Vec<C64> {
    let ctx = FftCtx::new(grid);
    let mut modes = vec![C64::ZERO; grid.npoints()];
    for i in 0..grid.n1 {
        let k1 = grid.k1(i);
        let amp = smooth_bump((k1 - k_center) / k_halfwidth);
        if amp == 0.0 {
            continue;
        }
        let phase = -k1 * x_center;
        for j in 0..grid.n2 {
            if j == 0 {
                modes[grid.idx(i, j)] = C64::new(phase.cos(), phase.sin()) * amp;
            }
        }
    }
    let mut out = modes;
    ctx.from_modes(&mut out);
    normalize(grid, &mut out);
    out
}

/// A plain Gaussian spectrum on axis 1 centered at `k_center` with width
/// `sigma_k`, translated to `x_center`; its spatial tails decay at the
/// Gaussian rate, much faster than any compactly supported spectrum allows.
pub fn mode_gaussian_state(
    grid: SpatialGrid,
    k_center: f64,
    sigma_k: f64,
    x_center: f64,
) -> Vec<C64> {
    let ctx = FftCtx::new(grid);
    let mut modes = vec![C64::ZERO; grid.npoints()];
    for i in 0..grid.n1 {
        let k1 = grid.k1(i);
        let u = (k1 - k_center) / sigma_k;
        let amp = (-0.5 * u * u).exp();
        let phase = -k1 * x_center;
        modes[grid.idx(i, 0)] = C64::new(phase.cos(), phase.sin()) * amp;
    }
    let mut out = modes;
    ctx.from_modes(&mut out);
    normalize(grid, &mut out);
    out
}

/// Normalize to unit L² norm with the grid quadrature weight.
pub fn normalize(grid: SpatialGrid, v: &mut [C64]) {
    let w = grid.weight();
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() * w;
    if n2 > 0.0 {
        let s = 1.0 / n2.sqrt();
        for z in v.iter_mut() {
            *z *= s;
        }
    }
}

/// L² norm with the grid quadrature weight.
pub fn l2_norm(grid: SpatialGrid, v: &[C64]) -> f64 {
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.weight()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PhasePoint;

    #[test]
    fn gaussian_packet_is_normalized() {
        let grid = SpatialGrid::square(32, 4.0);
        let v = gaussian_scalar(grid, 0.1, PhasePoint::new(0.0, 0.5, 1.0, 0.0));
        assert!((l2_norm(grid, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_packet_frequency_concentration() {
        let grid = SpatialGrid::square(64, 4.0);
        let eps = 0.1;
        let center = PhasePoint::new(0.0, 0.0, 1.0, 0.0);
        let mut v = gaussian_scalar(grid, eps, center);
        let ctx = crate::grid::FftCtx::new(grid);
        ctx.to_modes(&mut v);
        // Mass within |k − ξ⁰/ε| ≤ 4/√ε should be nearly all of it.
        let k0 = center.xi1 / eps;
        let width = 4.0 / eps.sqrt();
        let mut inside = 0.0;
        let mut total = 0.0;
        for i in 0..grid.n1 {
            for j in 0..grid.n2 {
                let m = v[grid.idx(i, j)].norm_sqr();
                total += m;
                let dk1 = grid.k1(i) - k0;
                let dk2 = grid.k2(j);
                if (dk1 * dk1 + dk2 * dk2).sqrt() <= width {
                    inside += m;
                }
            }
        }
        assert!(inside / total > 1.0 - 1e-6, "frequency leakage {}", 1.0 - inside / total);
    }

    #[test]
    fn mode_bump_state_is_band_limited() {
        let grid = SpatialGrid::line(256, 10.0);
        let v = mode_bump_state(grid, 4.0, 1.0, -2.0);
        assert!((l2_norm(grid, &v) - 1.0).abs() < 1e-12);
        let ctx = crate::grid::FftCtx::new(grid);
        let mut modes = v.clone();
        ctx.to_modes(&mut modes);
        for i in 0..grid.n1 {
            let k = grid.k1(i);
            if (k - 4.0).abs() >= 1.0 {
                assert!(modes[grid.idx(i, 0)].norm() < 1e-13, "leak at k={k}");
            }
        }
    }
}
