//! Discrete Weyl quantization on the periodic grid.
//!
//! The quantized operator acts on grid functions by
//!
//! ```text
//! (A f)(x_a) = (1/N) Σ_k Σ_b 𝒜((x_a+x_b)/2, ε·k) e^{i k·(x_a−x_b)} f(x_b)
//! ```
//!
//! with `k` running over the grid frequencies and midpoints evaluated
//! analytically. The kernel depends on the pair `(a, b)` only through the
//! midpoint class `s = a + b` and the offset `d = a − b (mod n)`, so each
//! class costs one inverse FFT of the symbol's frequency profile.
//!
//! Symbols that are affine in `ξ` with x-dependent coefficients (the whole
//! propagator family) are quantized through [`quantize_affine`] instead,
//! which uses the exact operator identities `Op(c(x)) = c(X)` and
//! `Op(c(x)·ξⱼ) = (c(X)∘εDⱼ + εDⱼ∘c(X))/2`; for such symbols the midpoint
//! rule's half-frequency interpolation error is avoided entirely, which is
//! what makes two independently assembled copies of the generator agree to
//! rounding.

use crate::algebra::Mat3;
use crate::coriolis::CoriolisProfile;
use crate::error::{Error, Result};
use crate::flow::BackgroundFlow;
use crate::grid::{FftCtx, SpatialGrid};
use crate::moyal::MatrixSymbol;
use crate::phase::PhasePoint;
use faer::Mat;
use num_complex::Complex64 as C64;
use std::io::{Read, Write};
use std::sync::Arc;

/// Matrix-free application of an operator.
pub trait LinearMap: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64>;
}

pub enum OpKind {
    Dense(Mat<C64>),
    MatrixFree(Arc<dyn LinearMap>),
}

/// A discrete operator on `ncomp` components over a grid, tagged with the
/// semiclassical parameter it was built at.
pub struct DiscreteOperator {
    pub grid: SpatialGrid,
    pub eps: f64,
    pub ncomp: usize,
    pub kind: OpKind,
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.ncomp * self.grid.npoints()
    }

    pub fn dense(&self) -> Option<&Mat<C64>> {
        match &self.kind {
            OpKind::Dense(m) => Some(m),
            OpKind::MatrixFree(_) => None,
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        match &self.kind {
            OpKind::Dense(m) => dense_apply(m, v),
            OpKind::MatrixFree(f) => f.apply(v),
        }
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        match &self.kind {
            OpKind::Dense(m) => dense_apply_adjoint(m, v),
            OpKind::MatrixFree(f) => f.apply_adjoint(v),
        }
    }

    /// Assemble a dense copy (columns by application for matrix-free).
    pub fn to_dense(&self) -> Mat<C64> {
        match &self.kind {
            OpKind::Dense(m) => m.clone(),
            OpKind::MatrixFree(f) => {
                let n = self.dim();
                let mut out = Mat::zeros(n, n);
                let mut e = vec![C64::ZERO; n];
                for j in 0..n {
                    e[j] = C64::new(1.0, 0.0);
                    let col = f.apply(&e);
                    for i in 0..n {
                        out[(i, j)] = col[i];
                    }
                    e[j] = C64::ZERO;
                }
                out
            }
        }
    }
}

pub fn dense_apply(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    assert_eq!(v.len(), m.ncols());
    let mut y = vec![C64::ZERO; n];
    for (j, &vj) in v.iter().enumerate() {
        if vj == C64::ZERO {
            continue;
        }
        for (yi, &aij) in y.iter_mut().zip(m.col(j).iter()) {
            *yi += aij * vj;
        }
    }
    y
}

pub fn dense_apply_adjoint(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.ncols();
    assert_eq!(v.len(), m.nrows());
    let mut y = vec![C64::ZERO; n];
    for (j, yj) in y.iter_mut().enumerate() {
        let mut s = C64::ZERO;
        for (&aij, &vi) in m.col(j).iter().zip(v.iter()) {
            s += aij.conj() * vi;
        }
        *yj = s;
    }
    y
}

/// Scalar phase-space symbols.
pub trait ScalarSymbol: Sync {
    fn eval(&self, p: PhasePoint) -> C64;
    fn x1_independent(&self) -> bool {
        false
    }
}

pub struct ScalarFn<F: Fn(PhasePoint) -> C64 + Sync> {
    pub f: F,
    pub x1_indep: bool,
}

impl<F: Fn(PhasePoint) -> C64 + Sync> ScalarSymbol for ScalarFn<F> {
    fn eval(&self, p: PhasePoint) -> C64 {
        (self.f)(p)
    }
    fn x1_independent(&self) -> bool {
        self.x1_indep
    }
}

/// `±√(ξ² + b²(x₂))` as a quantizable scalar symbol.
pub struct TauSymbol<'a> {
    pub profile: &'a CoriolisProfile,
    pub sign: f64,
}

impl ScalarSymbol for TauSymbol<'_> {
    fn eval(&self, p: PhasePoint) -> C64 {
        C64::new(crate::symbol::tau_pm(p, self.profile, self.sign), 0.0)
    }
    fn x1_independent(&self) -> bool {
        true
    }
}

/// Replaces symbol evaluations that fail (gap violations on the quantization
/// box) with a fixed fallback value, so quantization stays total. The
/// substituted cells only matter for states with mass there; microlocalized
/// test states keep clear of them.
pub struct Regularized<'a, S: MatrixSymbol + ?Sized> {
    pub inner: &'a S,
    pub fallback: Mat3,
}

impl<S: MatrixSymbol + ?Sized> MatrixSymbol for Regularized<'_, S> {
    fn eval(&self, p: PhasePoint) -> Result<Mat3> {
        match self.inner.eval(p) {
            Ok(m) => Ok(m),
            Err(Error::GapViolation { .. }) | Err(Error::DerivativeUnavailable(_)) => {
                Ok(self.fallback)
            }
            Err(e) => Err(e),
        }
    }
    fn x1_independent(&self) -> bool {
        self.inner.x1_independent()
    }
}

// ---------------------------------------------------------------------------
// General midpoint-class assembly.
// ---------------------------------------------------------------------------

trait Block: Copy {
    const NC: usize;
    fn entry(&self, i: usize, j: usize) -> C64;
}

impl Block for C64 {
    const NC: usize = 1;
    fn entry(&self, _i: usize, _j: usize) -> C64 {
        *self
    }
}

impl Block for Mat3 {
    const NC: usize = 3;
    fn entry(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }
}

fn assemble_midpoint<B: Block>(
    eval: &dyn Fn(PhasePoint) -> Result<B>,
    x1_indep: bool,
    eps: f64,
    grid: SpatialGrid,
) -> Result<Mat<C64>> {
    let (n1, n2) = (grid.n1, grid.n2);
    let npts = grid.npoints();
    let nc = B::NC;
    let dim = nc * npts;
    let ctx = FftCtx::new(grid);
    let mut dense: Mat<C64> = Mat::zeros(dim, dim);
    let inv_n = 1.0 / npts as f64;

    // Frequency values per storage index.
    let k1: Vec<f64> = (0..n1).map(|i| grid.k1(i)).collect();
    let k2: Vec<f64> = (0..n2).map(|j| grid.k2(j)).collect();

    let mut bufs: Vec<Vec<C64>> = vec![vec![C64::ZERO; npts]; nc * nc];

    let mut fill_and_scatter = |s1: usize, s2: usize, bufs: &mut Vec<Vec<C64>>, fresh: bool| -> Result<()> {
        let m1 = -grid.l1 + 0.5 * grid.h1() * s1 as f64;
        let m2 = -grid.l2 + 0.5 * grid.h2() * s2 as f64;
        if fresh {
            for i in 0..n1 {
                for j in 0..n2 {
                    let p = PhasePoint::new(m1, m2, eps * k1[i], eps * k2[j]);
                    let b = eval(p)?;
                    let idx = i * n2 + j;
                    for r in 0..nc {
                        for c in 0..nc {
                            bufs[r * nc + c][idx] = b.entry(r, c);
                        }
                    }
                }
            }
            for buf in bufs.iter_mut() {
                ctx.inverse(buf);
                for v in buf.iter_mut() {
                    *v *= inv_n;
                }
            }
        }
        // Scatter to every pair in this midpoint class.
        let a1_lo = s1.saturating_sub(n1 - 1);
        let a1_hi = s1.min(n1 - 1);
        let a2_lo = s2.saturating_sub(n2 - 1);
        let a2_hi = s2.min(n2 - 1);
        for a1 in a1_lo..=a1_hi {
            let b1 = s1 - a1;
            let d1 = (a1 + n1 - b1) % n1;
            for a2 in a2_lo..=a2_hi {
                let b2 = s2 - a2;
                let d2 = (a2 + n2 - b2) % n2;
                let kidx = d1 * n2 + d2;
                let row0 = a1 * n2 + a2;
                let col0 = b1 * n2 + b2;
                for r in 0..nc {
                    for c in 0..nc {
                        dense[(r * npts + row0, c * npts + col0)] = bufs[r * nc + c][kidx];
                    }
                }
            }
        }
        Ok(())
    };

    if x1_indep {
        for s2 in 0..(2 * n2 - 1) {
            let mut fresh = true;
            for s1 in 0..(2 * n1 - 1) {
                fill_and_scatter(s1, s2, &mut bufs, fresh)?;
                fresh = false;
            }
        }
    } else {
        for s1 in 0..(2 * n1 - 1) {
            for s2 in 0..(2 * n2 - 1) {
                fill_and_scatter(s1, s2, &mut bufs, true)?;
            }
        }
    }
    Ok(dense)
}

/// Fraction of sampled phase-space cells allowed to vary wildly before the
/// symbol is declared unresolvable (isolated regularized cells are fine).
const BANDWIDTH_BAD_FRACTION: f64 = 0.05;
const BANDWIDTH_JUMP: f64 = 1.0;

fn bandwidth_check<B: Block>(
    eval: &dyn Fn(PhasePoint) -> Result<B>,
    eps: f64,
    grid: SpatialGrid,
) -> Result<()> {
    let mut bad = 0usize;
    let mut total = 0usize;
    let step1 = (grid.n1 / 16).max(1);
    let step2 = (grid.n2 / 16).max(1);
    let norm_of = |b: &B| -> f64 {
        let mut s = 0.0;
        for i in 0..B::NC {
            for j in 0..B::NC {
                s += b.entry(i, j).norm_sqr();
            }
        }
        s.sqrt()
    };
    let mut probe = |p: PhasePoint, q: PhasePoint| -> Result<()> {
        let bp = eval(p)?;
        let bq = eval(q)?;
        let mut diff = 0.0;
        for i in 0..B::NC {
            for j in 0..B::NC {
                diff += (bp.entry(i, j) - bq.entry(i, j)).norm_sqr();
            }
        }
        let rel = diff.sqrt() / (1.0 + norm_of(&bp).max(norm_of(&bq)));
        total += 1;
        if rel > BANDWIDTH_JUMP {
            bad += 1;
        }
        Ok(())
    };
    // Compare only non-wrapping neighbor pairs: the jumps across the
    // position seam and the frequency fold are structural, not a
    // resolution failure.
    for i in (0..grid.n1.saturating_sub(1)).step_by(step1) {
        for j in (0..grid.n2.saturating_sub(1)).step_by(step2) {
            let x = PhasePoint::new(grid.x1(i), grid.x2(j), eps * grid.k1(i), eps * grid.k2(j));
            let xshift = PhasePoint::new(grid.x1(i + 1), grid.x2(j + 1), x.xi1, x.xi2);
            probe(x, xshift)?;
            let (ka, kb) = (i + 1, j + 1);
            if SpatialGrid::mode(ka, grid.n1) == SpatialGrid::mode(i, grid.n1) + 1
                && SpatialGrid::mode(kb, grid.n2) == SpatialGrid::mode(j, grid.n2) + 1
            {
                let kshift =
                    PhasePoint::new(x.x1, x.x2, eps * grid.k1(ka), eps * grid.k2(kb));
                probe(x, kshift)?;
            }
        }
    }
    if (bad as f64) > BANDWIDTH_BAD_FRACTION * total as f64 {
        return Err(Error::GridTooCoarse(format!(
            "{bad}/{total} sampled cells exceed the per-cell symbol variation budget"
        )));
    }
    Ok(())
}

/// Quantize a 3×3 matrix symbol by the midpoint-class rule.
pub fn quantize_matrix(
    sym: &dyn MatrixSymbol,
    eps: f64,
    grid: SpatialGrid,
) -> Result<DiscreteOperator> {
    assert!(eps > 0.0);
    let eval = |p: PhasePoint| sym.eval(p);
    bandwidth_check(&eval, eps, grid)?;
    let dense = assemble_midpoint(&eval, sym.x1_independent(), eps, grid)?;
    Ok(DiscreteOperator {
        grid,
        eps,
        ncomp: 3,
        kind: OpKind::Dense(dense),
    })
}

/// Matrix-free form of the midpoint-class quantization: the same action as
/// the dense assembly, recomputing each class kernel per application.
/// `O(N²)`-ish per apply, but `O(N)` memory — for grids past the dense cap.
pub struct MidpointApplicator<S: MatrixSymbol> {
    pub sym: S,
    pub eps: f64,
    pub grid: SpatialGrid,
}

impl<S: MatrixSymbol> MidpointApplicator<S> {
    fn apply_impl(&self, v: &[C64], adjoint: bool) -> Result<Vec<C64>> {
        let grid = self.grid;
        let (n1, n2) = (grid.n1, grid.n2);
        let npts = grid.npoints();
        assert_eq!(v.len(), 3 * npts);
        let ctx = FftCtx::new(grid);
        let inv_n = 1.0 / npts as f64;
        let k1: Vec<f64> = (0..n1).map(|i| grid.k1(i)).collect();
        let k2: Vec<f64> = (0..n2).map(|j| grid.k2(j)).collect();
        let mut out = vec![C64::ZERO; 3 * npts];
        let mut bufs: Vec<Vec<C64>> = vec![vec![C64::ZERO; npts]; 9];
        for s1 in 0..(2 * n1 - 1) {
            for s2 in 0..(2 * n2 - 1) {
                let m1 = -grid.l1 + 0.5 * grid.h1() * s1 as f64;
                let m2 = -grid.l2 + 0.5 * grid.h2() * s2 as f64;
                for i in 0..n1 {
                    for j in 0..n2 {
                        let p = PhasePoint::new(m1, m2, self.eps * k1[i], self.eps * k2[j]);
                        let b = self.sym.eval(p)?;
                        let idx = i * n2 + j;
                        for r in 0..3 {
                            for c in 0..3 {
                                bufs[r * 3 + c][idx] = b.0[r][c];
                            }
                        }
                    }
                }
                for buf in bufs.iter_mut() {
                    ctx.inverse(buf);
                    for z in buf.iter_mut() {
                        *z *= inv_n;
                    }
                }
                let a1_lo = s1.saturating_sub(n1 - 1);
                let a1_hi = s1.min(n1 - 1);
                let a2_lo = s2.saturating_sub(n2 - 1);
                let a2_hi = s2.min(n2 - 1);
                for a1 in a1_lo..=a1_hi {
                    let b1 = s1 - a1;
                    let d1 = (a1 + n1 - b1) % n1;
                    for a2 in a2_lo..=a2_hi {
                        let b2 = s2 - a2;
                        let d2 = (a2 + n2 - b2) % n2;
                        let kidx = d1 * n2 + d2;
                        let row0 = a1 * n2 + a2;
                        let col0 = b1 * n2 + b2;
                        for r in 0..3 {
                            for c in 0..3 {
                                let kval = bufs[r * 3 + c][kidx];
                                if adjoint {
                                    // K*(b,a) contributes conj(K(a,b)) at
                                    // the transposed slot.
                                    out[c * npts + col0] += kval.conj() * v[r * npts + row0];
                                } else {
                                    out[r * npts + row0] += kval * v[c * npts + col0];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<S: MatrixSymbol + Send + Sync> LinearMap for MidpointApplicator<S> {
    fn dim(&self) -> usize {
        3 * self.grid.npoints()
    }
    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_impl(v, false).expect("symbol evaluation failed")
    }
    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.apply_impl(v, true).expect("symbol evaluation failed")
    }
}

/// Matrix-free quantization of a matrix symbol.
pub fn quantize_matrix_free<S: MatrixSymbol + Send + Sync + 'static>(
    sym: S,
    eps: f64,
    grid: SpatialGrid,
) -> DiscreteOperator {
    DiscreteOperator {
        grid,
        eps,
        ncomp: 3,
        kind: OpKind::MatrixFree(Arc::new(MidpointApplicator { sym, eps, grid })),
    }
}

/// Quantize a scalar symbol by the midpoint-class rule.
pub fn quantize_scalar(
    sym: &dyn ScalarSymbol,
    eps: f64,
    grid: SpatialGrid,
) -> Result<DiscreteOperator> {
    assert!(eps > 0.0);
    let eval = |p: PhasePoint| -> Result<C64> { Ok(sym.eval(p)) };
    bandwidth_check(&eval, eps, grid)?;
    let dense = assemble_midpoint(&eval, sym.x1_independent(), eps, grid)?;
    Ok(DiscreteOperator {
        grid,
        eps,
        ncomp: 1,
        kind: OpKind::Dense(dense),
    })
}

// ---------------------------------------------------------------------------
// Exact path for symbols affine in ξ.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum XiFactor {
    One,
    Xi1,
    Xi2,
}

pub enum Coeff {
    Const(C64),
    Field(Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>),
}

impl Coeff {
    fn eval(&self, x1: f64, x2: f64) -> C64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Field(f) => f(x1, x2),
        }
    }
}

/// One term `coeff(x)·m(ξ)` placed at block entry `(row, col)`.
pub struct AffineTerm {
    pub row: usize,
    pub col: usize,
    pub xi: XiFactor,
    pub coeff: Coeff,
}

/// A matrix symbol that is affine in `ξ`: `Σ terms`.
pub struct AffineSymbol {
    pub ncomp: usize,
    pub terms: Vec<AffineTerm>,
}

/// 1-D multiplier kernel `μ(d) = (1/n) Σ_m ε·k(m) e^{2πi m d/n}`, computed
/// directly (axes are small).
pub fn kernel_1d(n: usize, kval: &dyn Fn(usize) -> f64, eps: f64) -> Vec<C64> {
    let vals: Vec<C64> = (0..n).map(|i| C64::new(eps * kval(i), 0.0)).collect();
    let mut out = vec![C64::ZERO; n];
    for (d, o) in out.iter_mut().enumerate() {
        let mut s = C64::ZERO;
        for (m, v) in vals.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * (m * d % n) as f64 / n as f64;
            s += v * C64::new(phase.cos(), phase.sin());
        }
        *o = s / n as f64;
    }
    out
}

/// Quantize an affine symbol exactly:
/// `Op(c(x)) = c(X)`, `Op(c(x) ξⱼ) = (c(X)∘εDⱼ + εDⱼ∘c(X))/2`.
pub fn quantize_affine(sym: &AffineSymbol, eps: f64, grid: SpatialGrid) -> DiscreteOperator {
    let (n1, n2) = (grid.n1, grid.n2);
    let npts = grid.npoints();
    let dim = sym.ncomp * npts;
    let mut dense: Mat<C64> = Mat::zeros(dim, dim);

    let mu1 = kernel_1d(n1, &|i| grid.k1(i), eps);
    let mu2 = kernel_1d(n2, &|j| grid.k2(j), eps);

    for term in &sym.terms {
        let (r0, c0) = (term.row * npts, term.col * npts);
        match term.xi {
            XiFactor::One => {
                for a1 in 0..n1 {
                    for a2 in 0..n2 {
                        let a = a1 * n2 + a2;
                        dense[(r0 + a, c0 + a)] += term.coeff.eval(grid.x1(a1), grid.x2(a2));
                    }
                }
            }
            XiFactor::Xi1 => {
                for a1 in 0..n1 {
                    for b1 in 0..n1 {
                        let mu = mu1[(a1 + n1 - b1) % n1];
                        if mu == C64::ZERO {
                            continue;
                        }
                        for a2 in 0..n2 {
                            let ca = term.coeff.eval(grid.x1(a1), grid.x2(a2));
                            let cb = term.coeff.eval(grid.x1(b1), grid.x2(a2));
                            let a = a1 * n2 + a2;
                            let b = b1 * n2 + a2;
                            dense[(r0 + a, c0 + b)] += 0.5 * (ca + cb) * mu;
                        }
                    }
                }
            }
            XiFactor::Xi2 => {
                for a2 in 0..n2 {
                    for b2 in 0..n2 {
                        let mu = mu2[(a2 + n2 - b2) % n2];
                        if mu == C64::ZERO {
                            continue;
                        }
                        for a1 in 0..n1 {
                            let ca = term.coeff.eval(grid.x1(a1), grid.x2(a2));
                            let cb = term.coeff.eval(grid.x1(a1), grid.x2(b2));
                            let a = a1 * n2 + a2;
                            let b = a1 * n2 + b2;
                            dense[(r0 + a, c0 + b)] += 0.5 * (ca + cb) * mu;
                        }
                    }
                }
            }
        }
    }
    DiscreteOperator {
        grid,
        eps,
        ncomp: sym.ncomp,
        kind: OpKind::Dense(dense),
    }
}

/// The full propagator symbol in affine form: leading order, drift and
/// shear, with the rotation block carried as `∓i·b(x₂)` multiplications.
pub fn propagator_affine(
    profile: &CoriolisProfile,
    flow: &BackgroundFlow,
    eps: f64,
) -> AffineSymbol {
    let mut terms = vec![
        AffineTerm { row: 0, col: 1, xi: XiFactor::Xi1, coeff: Coeff::Const(C64::ONE) },
        AffineTerm { row: 1, col: 0, xi: XiFactor::Xi1, coeff: Coeff::Const(C64::ONE) },
        AffineTerm { row: 0, col: 2, xi: XiFactor::Xi2, coeff: Coeff::Const(C64::ONE) },
        AffineTerm { row: 2, col: 0, xi: XiFactor::Xi2, coeff: Coeff::Const(C64::ONE) },
    ];
    let prof = *profile;
    let fl = *flow;
    let e2 = eps * eps;
    terms.push(AffineTerm {
        row: 1,
        col: 2,
        xi: XiFactor::One,
        coeff: Coeff::Field(Arc::new(move |x1, x2| {
            let g = fl.grad(x1, x2);
            C64::new(0.0, -prof.b(x2) + e2 * g.d[1][0])
        })),
    });
    terms.push(AffineTerm {
        row: 2,
        col: 1,
        xi: XiFactor::One,
        coeff: Coeff::Field(Arc::new(move |x1, x2| {
            let g = fl.grad(x1, x2);
            C64::new(0.0, prof.b(x2) + e2 * g.d[0][1])
        })),
    });
    if !flow.is_zero() {
        for comp in 0..3 {
            let fl1 = fl;
            terms.push(AffineTerm {
                row: comp,
                col: comp,
                xi: XiFactor::Xi1,
                coeff: Coeff::Field(Arc::new(move |x1, x2| C64::new(eps * fl1.u(x1, x2).0, 0.0))),
            });
            terms.push(AffineTerm {
                row: comp,
                col: comp,
                xi: XiFactor::Xi2,
                coeff: Coeff::Field(Arc::new(move |x1, x2| C64::new(eps * fl1.u(x1, x2).1, 0.0))),
            });
        }
        for (row, col, i, j) in [(1usize, 1usize, 0usize, 0usize), (2, 2, 1, 1)] {
            let fl1 = fl;
            terms.push(AffineTerm {
                row,
                col,
                xi: XiFactor::One,
                coeff: Coeff::Field(Arc::new(move |x1, x2| {
                    C64::new(0.0, e2 * fl1.grad(x1, x2).d[i][j])
                })),
            });
        }
    }
    AffineSymbol { ncomp: 3, terms }
}

// ---------------------------------------------------------------------------
// Norms and adjoints.
// ---------------------------------------------------------------------------

/// Operator 2-norm by power iteration on `A*A` with a fixed deterministic
/// start vector.
pub fn op_norm(op: &DiscreteOperator, iters: usize) -> f64 {
    let n = op.dim();
    let mut stream = crate::rng::Stream::derive(0x6f70_6e6f, "op-norm", n as u64);
    let mut v: Vec<C64> = (0..n)
        .map(|_| C64::new(stream.next_gaussian(), stream.next_gaussian()))
        .collect();
    let mut sigma = 0.0;
    for _ in 0..iters {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for z in v.iter_mut() {
            *z /= norm;
        }
        let av = op.apply(&v);
        let aav = op.apply_adjoint(&av);
        sigma = av.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v = aav;
    }
    sigma
}

/// `‖Op − Op*‖`, the self-adjointness defect.
pub fn adjoint_defect(op: &DiscreteOperator) -> f64 {
    match &op.kind {
        OpKind::Dense(m) => {
            let n = m.nrows();
            let mut diff = Mat::<C64>::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    diff[(i, j)] = m[(i, j)] - m[(j, i)].conj();
                }
            }
            let wrapped = DiscreteOperator {
                grid: op.grid,
                eps: op.eps,
                ncomp: op.ncomp,
                kind: OpKind::Dense(diff),
            };
            op_norm(&wrapped, 60)
        }
        OpKind::MatrixFree(f) => {
            let f = f.clone();
            struct Diff(Arc<dyn LinearMap>);
            impl LinearMap for Diff {
                fn dim(&self) -> usize {
                    self.0.dim()
                }
                fn apply(&self, v: &[C64]) -> Vec<C64> {
                    let a = self.0.apply(v);
                    let b = self.0.apply_adjoint(v);
                    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
                }
                fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
                    let a = self.0.apply_adjoint(v);
                    let b = self.0.apply(v);
                    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
                }
            }
            let wrapped = DiscreteOperator {
                grid: op.grid,
                eps: op.eps,
                ncomp: op.ncomp,
                kind: OpKind::MatrixFree(Arc::new(Diff(f))),
            };
            op_norm(&wrapped, 60)
        }
    }
}

// ---------------------------------------------------------------------------
// Symbol round-trip (inverse quantization at interior grid points).
// ---------------------------------------------------------------------------

/// Recover the symbol's frequency profile of a dense operator at the grid
/// point `(a1, a2)`.
///
/// Returns one 3×3 (or 1×1 in the scalar case, stored in entry `(0,0)`)
/// matrix per frequency index in storage order. Even-offset kernel values
/// come from the point's own midpoint class, odd offsets from the average of
/// the two adjacent classes; the half-band fold cancels between them, so the
/// recovery is exact for symbols that factor into x-only and ξ-only parts
/// and `O(h²)` otherwise. Points closer than `n/4` to a box edge lack
/// complete midpoint classes and are rejected.
pub fn symbol_roundtrip(
    op: &DiscreteOperator,
    a1: usize,
    a2: usize,
) -> Result<Vec<Mat3>> {
    let m = op
        .dense()
        .ok_or_else(|| Error::OperatorMismatch("round-trip needs a dense operator".into()))?;
    let grid = op.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let npts = grid.npoints();
    if a1 < n1 / 4 || a1 >= n1 - n1 / 4 || a2 < n2 / 4 || a2 >= n2 - n2 / 4 {
        return Err(Error::GridTooCoarse(
            "symbol round-trip needs an interior grid point (incomplete midpoint classes near the edge)"
                .into(),
        ));
    }

    // Find a representative pair (a, b) with a+b = s, a−b ≡ d (mod n).
    let find = |s: i64, d: i64, n: i64| -> Option<(i64, i64)> {
        for wrap in [-1i64, 0, 1] {
            let dd = d + wrap * n;
            if (s + dd) % 2 != 0 {
                continue;
            }
            let a = (s + dd) / 2;
            let b = s - a;
            if a >= 0 && a < n && b >= 0 && b < n {
                return Some((a, b));
            }
        }
        None
    };
    // Kernel g(d1, d2) for block (r, c): per-axis parity selects the
    // midpoint class; odd offsets average the two neighbor classes.
    let fetch = |r: usize, c: usize, s1: i64, s2: i64, d1: i64, d2: i64| -> Option<C64> {
        let (a1p, b1p) = find(s1, d1, n1 as i64)?;
        let (a2p, b2p) = find(s2, d2, n2 as i64)?;
        let row = r * npts + (a1p as usize) * n2 + a2p as usize;
        let col = c * npts + (b1p as usize) * n2 + b2p as usize;
        Some(m[(row, col)])
    };

    let ctx = FftCtx::new(grid);
    let mut out = vec![Mat3::zero(); npts];
    let mut buf = vec![C64::ZERO; npts];
    for r in 0..op.ncomp {
        for c in 0..op.ncomp {
            // Assemble g̃(d) for this block entry.
            for d1i in 0..n1 {
                let d1 = SpatialGrid::mode(d1i, n1);
                for d2i in 0..n2 {
                    let d2 = SpatialGrid::mode(d2i, n2);
                    let mut acc = C64::ZERO;
                    let mut count = 0usize;
                    let s1opts: &[i64] = if d1.rem_euclid(2) == 0 {
                        &[2 * a1 as i64]
                    } else {
                        &[2 * a1 as i64 - 1, 2 * a1 as i64 + 1]
                    };
                    let s2opts: &[i64] = if d2.rem_euclid(2) == 0 {
                        &[2 * a2 as i64]
                    } else {
                        &[2 * a2 as i64 - 1, 2 * a2 as i64 + 1]
                    };
                    for &s1 in s1opts {
                        for &s2 in s2opts {
                            if let Some(v) = fetch(r, c, s1, s2, d1, d2) {
                                acc += v;
                                count += 1;
                            }
                        }
                    }
                    buf[d1i * n2 + d2i] = if count > 0 {
                        acc / count as f64
                    } else {
                        C64::ZERO
                    };
                }
            }
            // σ(x_a, k) = Σ_d g̃(d) e^{−i k·h·d}: a forward DFT in d.
            ctx.forward(&mut buf);
            for (idx, v) in buf.iter().enumerate() {
                out[idx].0[r][c] = *v;
            }
            buf.iter_mut().for_each(|z| *z = C64::ZERO);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Binary dump.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 8] = b"WEYLOP01";

/// Write a dense operator: 32-byte header (magic, n1, n2, eps) followed by
/// row-major complex128 little-endian entries.
pub fn dump_dense<W: Write>(op: &DiscreteOperator, mut w: W) -> Result<()> {
    let m = op
        .dense()
        .ok_or_else(|| Error::OperatorMismatch("dump needs a dense operator".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&(op.grid.n1 as u64).to_le_bytes())?;
    w.write_all(&(op.grid.n2 as u64).to_le_bytes())?;
    w.write_all(&op.eps.to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read a dense operator written by [`dump_dense`]. Box lengths are not part
/// of the header and must be supplied.
pub fn load_dense<R: Read>(mut r: R, l1: f64, l2: f64) -> Result<DiscreteOperator> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..8] != MAGIC {
        return Err(Error::Io("bad magic in operator dump".into()));
    }
    let n1 = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let n2 = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let eps = f64::from_le_bytes(header[24..32].try_into().unwrap());
    let npts = n1 * n2;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let entries = body.len() / 16;
    let dim = (entries as f64).sqrt().round() as usize;
    if dim * dim * 16 != body.len() || dim % npts != 0 {
        return Err(Error::Io("operator dump has inconsistent size".into()));
    }
    let grid = SpatialGrid::new(n1, n2, l1, l2);
    let mut m: Mat<C64> = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let off = (i * dim + j) * 16;
            let re = f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(body[off + 8..off + 16].try_into().unwrap());
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(DiscreteOperator {
        grid,
        eps,
        ncomp: dim / npts,
        kind: OpKind::Dense(m),
    })
}
