//! First-order Moyal calculus on 3×3 matrix symbols.
//!
//! The composition law of Weyl quantization, truncated at order ε, is
//! `a # b = a·b + ε·(1/2i){a, b} + O(ε²)` with the matrix-ordered Poisson
//! bracket `{a, b} = Σⱼ ∂_{ξⱼ}a·∂_{xⱼ}b − ∂_{xⱼ}a·∂_{ξⱼ}b`. This module
//! evaluates the bracket, the truncated product, the unitarity defect `I₁`
//! of the eigenframe, and the first diagonal correction `D₁` whose middle
//! (kernel-branch) entry must reproduce the Rossby Hamiltonian.

use crate::algebra::{c, Mat3};
use crate::coriolis::CoriolisProfile;
use crate::error::Result;
use crate::flow::BackgroundFlow;
use crate::phase::{PhasePoint, PhaseVar};
use crate::symbol::{
    drift_symbol, eigenframe, eigenframe_partial, leading_eigensystem, leading_symbol,
};
use num_complex::Complex64 as C64;

/// Default step for centered finite-difference partials.
pub const FD_STEP: f64 = 1e-5;

const HALF_OVER_I: C64 = C64::new(0.0, -0.5); // 1/(2i)

/// A matrix-valued phase-space function with partial derivatives.
///
/// The default `partial` is a centered finite difference at step
/// [`FD_STEP`] with one Richardson extrapolation; implementors with closed
/// forms override it.
pub trait MatrixSymbol: Sync {
    fn eval(&self, p: PhasePoint) -> Result<Mat3>;

    fn partial(&self, p: PhasePoint, var: PhaseVar) -> Result<Mat3> {
        fd_partial(&|q| self.eval(q), p, var, FD_STEP)
    }

    /// Whether the symbol is independent of `x₁` (enables caching in
    /// quantization).
    fn x1_independent(&self) -> bool {
        false
    }
}

/// Centered difference with one Richardson extrapolation step.
pub fn fd_partial(
    f: &dyn Fn(PhasePoint) -> Result<Mat3>,
    p: PhasePoint,
    var: PhaseVar,
    h: f64,
) -> Result<Mat3> {
    let diff = |h: f64| -> Result<Mat3> {
        let plus = f(var.shift(p, h))?;
        let minus = f(var.shift(p, -h))?;
        Ok(plus.sub(&minus).scale(c(1.0 / (2.0 * h))))
    };
    let d1 = diff(h)?;
    let d2 = diff(0.5 * h)?;
    Ok(d2.scale(c(4.0 / 3.0)).sub(&d1.scale(c(1.0 / 3.0))))
}

/// Hermitian leading-order propagator symbol as a [`MatrixSymbol`].
pub struct LeadingSymbol<'a> {
    pub profile: &'a CoriolisProfile,
}

impl MatrixSymbol for LeadingSymbol<'_> {
    fn eval(&self, p: PhasePoint) -> Result<Mat3> {
        Ok(leading_symbol(p, self.profile))
    }

    fn partial(&self, p: PhasePoint, var: PhaseVar) -> Result<Mat3> {
        let mut m = Mat3::zero();
        match var {
            PhaseVar::X1 => {}
            PhaseVar::X2 => {
                let db = self.profile.db(p.x2);
                m.0[1][2] = C64::new(0.0, -db);
                m.0[2][1] = C64::new(0.0, db);
            }
            PhaseVar::Xi1 => {
                m.0[0][1] = c(1.0);
                m.0[1][0] = c(1.0);
            }
            PhaseVar::Xi2 => {
                m.0[0][2] = c(1.0);
                m.0[2][0] = c(1.0);
            }
        }
        Ok(m)
    }

    fn x1_independent(&self) -> bool {
        true
    }
}

/// The scalar drift `ū·ξ` times the identity (order-ε coefficient).
pub struct DriftSymbol<'a> {
    pub flow: &'a BackgroundFlow,
}

impl MatrixSymbol for DriftSymbol<'_> {
    fn eval(&self, p: PhasePoint) -> Result<Mat3> {
        Ok(drift_symbol(p, self.flow))
    }

    fn partial(&self, p: PhasePoint, var: PhaseVar) -> Result<Mat3> {
        let s = match var {
            PhaseVar::X1 => {
                let g = self.flow.grad(p.x1, p.x2);
                g.d[0][0] * p.xi1 + g.d[0][1] * p.xi2
            }
            PhaseVar::X2 => {
                let g = self.flow.grad(p.x1, p.x2);
                g.d[1][0] * p.xi1 + g.d[1][1] * p.xi2
            }
            PhaseVar::Xi1 => self.flow.u(p.x1, p.x2).0,
            PhaseVar::Xi2 => self.flow.u(p.x1, p.x2).1,
        };
        Ok(Mat3::identity().scale(c(s)))
    }

    fn x1_independent(&self) -> bool {
        self.flow.is_zero()
    }
}

/// The eigenframe `𝒰(x, ξ)` with closed-form partials.
pub struct FrameSymbol<'a> {
    pub profile: &'a CoriolisProfile,
}

impl MatrixSymbol for FrameSymbol<'_> {
    fn eval(&self, p: PhasePoint) -> Result<Mat3> {
        eigenframe(p, self.profile)
    }

    fn partial(&self, p: PhasePoint, var: PhaseVar) -> Result<Mat3> {
        eigenframe_partial(p, self.profile, var)
    }

    fn x1_independent(&self) -> bool {
        true
    }
}

/// Adjoint of another symbol.
pub struct AdjointSymbol<'a, S: MatrixSymbol + ?Sized>(pub &'a S);

impl<S: MatrixSymbol + ?Sized> MatrixSymbol for AdjointSymbol<'_, S> {
    fn eval(&self, p: PhasePoint) -> Result<Mat3> {
        Ok(self.0.eval(p)?.adjoint())
    }

    fn partial(&self, p: PhasePoint, var: PhaseVar) -> Result<Mat3> {
        Ok(self.0.partial(p, var)?.adjoint())
    }

    fn x1_independent(&self) -> bool {
        self.0.x1_independent()
    }
}

/// Constant matrix symbol.
pub struct ConstSymbol(pub Mat3);

impl MatrixSymbol for ConstSymbol {
    fn eval(&self, _p: PhasePoint) -> Result<Mat3> {
        Ok(self.0)
    }

    fn partial(&self, _p: PhasePoint, _var: PhaseVar) -> Result<Mat3> {
        Ok(Mat3::zero())
    }

    fn x1_independent(&self) -> bool {
        true
    }
}

/// Closure-backed symbol with finite-difference partials.
pub struct FnSymbol<F: Fn(PhasePoint) -> Result<Mat3> + Sync>(pub F);

impl<F: Fn(PhasePoint) -> Result<Mat3> + Sync> MatrixSymbol for FnSymbol<F> {
    fn eval(&self, p: PhasePoint) -> Result<Mat3> {
        (self.0)(p)
    }
}

/// A symbol truncated at first order in ε: `order0 + ε·order1`.
pub struct FirstOrderSymbol<'a> {
    pub order0: &'a dyn MatrixSymbol,
    pub order1: Option<&'a dyn MatrixSymbol>,
}

impl<'a> FirstOrderSymbol<'a> {
    pub fn flat(order0: &'a dyn MatrixSymbol) -> Self {
        Self {
            order0,
            order1: None,
        }
    }

    pub fn eval(&self, p: PhasePoint, eps: f64) -> Result<Mat3> {
        let mut m = self.order0.eval(p)?;
        if let Some(o1) = self.order1 {
            m = m.add(&o1.eval(p)?.scale(c(eps)));
        }
        Ok(m)
    }
}

/// Matrix-ordered Poisson bracket
/// `{a, b}(p) = Σⱼ ∂_{ξⱼ}a·∂_{xⱼ}b − ∂_{xⱼ}a·∂_{ξⱼ}b`.
pub fn poisson_bracket(
    a: &dyn MatrixSymbol,
    b: &dyn MatrixSymbol,
    p: PhasePoint,
) -> Result<Mat3> {
    let mut out = Mat3::zero();
    for (xv, kv) in [(PhaseVar::X1, PhaseVar::Xi1), (PhaseVar::X2, PhaseVar::Xi2)] {
        let a_k = a.partial(p, kv)?;
        let a_x = a.partial(p, xv)?;
        let b_x = b.partial(p, xv)?;
        let b_k = b.partial(p, kv)?;
        out = out.add(&a_k.mul(&b_x)).sub(&a_x.mul(&b_k));
    }
    Ok(out)
}

/// First-order Moyal product of two first-order symbols at a point:
/// `order0 = s₀t₀`, `order1 = s₀t₁ + s₁t₀ + (1/2i){s₀, t₀}`.
pub fn moyal1(
    s: &FirstOrderSymbol,
    t: &FirstOrderSymbol,
    p: PhasePoint,
) -> Result<(Mat3, Mat3)> {
    let s0 = s.order0.eval(p)?;
    let t0 = t.order0.eval(p)?;
    let order0 = s0.mul(&t0);
    let mut order1 = poisson_bracket(s.order0, t.order0, p)?.scale(HALF_OVER_I);
    if let Some(t1) = t.order1 {
        order1 = order1.add(&s0.mul(&t1.eval(p)?));
    }
    if let Some(s1) = s.order1 {
        order1 = order1.add(&s1.eval(p)?.mul(&t0));
    }
    Ok((order0, order1))
}

/// Order-ε symbol of `U* # U − Id`, i.e. `(1/2i){U*, U}(p)`.
///
/// Hermitian at every point where the frame is unitary: `U*U` is
/// self-adjoint, so every coefficient of its symbol expansion is
/// Hermitian-valued ({U*, U} itself is anti-Hermitian and the `1/2i`
/// flips it).
pub fn i1_symbol(u: &dyn MatrixSymbol, p: PhasePoint) -> Result<Mat3> {
    poisson_bracket(&AdjointSymbol(u), u, p).map(|m| m.scale(HALF_OVER_I))
}

/// Full first-order correction matrix `Δ₁ − (D·I₁ + I₁·D)/2` at `p`.
///
/// `Δ₁` is the order-ε coefficient of `U* # 𝒜 # U` with `𝒜₁ = ū·ξ·Id`;
/// `D = diag(−τ, 0, τ)`.
pub fn d1_matrix(
    p: PhasePoint,
    profile: &CoriolisProfile,
    flow: &BackgroundFlow,
) -> Result<Mat3> {
    let frame = FrameSymbol { profile };
    let a0 = LeadingSymbol { profile };

    let u = frame.eval(p)?;
    let u_adj = u.adjoint();
    let a0v = a0.eval(p)?;

    // Partials of U and 𝒜₀ in all four directions, computed once.
    let mut du = [Mat3::zero(); 4];
    let mut da = [Mat3::zero(); 4];
    for (k, var) in PhaseVar::ALL.iter().enumerate() {
        du[k] = frame.partial(p, *var)?;
        da[k] = a0.partial(p, *var)?;
    }
    let idx = |v: PhaseVar| match v {
        PhaseVar::X1 => 0,
        PhaseVar::X2 => 1,
        PhaseVar::Xi1 => 2,
        PhaseVar::Xi2 => 3,
    };

    let mut bracket_sum = Mat3::zero();
    let mut i1 = Mat3::zero();
    for (xv, kv) in [(PhaseVar::X1, PhaseVar::Xi1), (PhaseVar::X2, PhaseVar::Xi2)] {
        let (xk, kk) = (idx(xv), idx(kv));
        let du_x = &du[xk];
        let du_k = &du[kk];
        let da_x = &da[xk];
        let da_k = &da[kk];
        // {U*, 𝒜₀}·U
        let t1 = du_k.adjoint().mul(da_x).sub(&du_x.adjoint().mul(da_k)).mul(&u);
        // {U*𝒜₀, U} with the product rule for ∂(U*𝒜₀).
        let dka = du_k.adjoint().mul(&a0v).add(&u_adj.mul(da_k));
        let dxa = du_x.adjoint().mul(&a0v).add(&u_adj.mul(da_x));
        let t2 = dka.mul(du_x).sub(&dxa.mul(du_k));
        bracket_sum = bracket_sum.add(&t1).add(&t2);
        i1 = i1.add(&du_k.adjoint().mul(du_x).sub(&du_x.adjoint().mul(du_k)));
    }
    let i1 = i1.scale(HALF_OVER_I);

    let mut delta1 = bracket_sum.scale(HALF_OVER_I);
    if !flow.is_zero() {
        let a1v = drift_symbol(p, flow);
        delta1 = delta1.add(&u_adj.mul(&a1v).mul(&u));
    }

    let frame_vals = leading_eigensystem(p, profile)?;
    let d = Mat3::diag([
        c(frame_vals.lambda[0]),
        c(frame_vals.lambda[1]),
        c(frame_vals.lambda[2]),
    ]);
    let sym = d.mul(&i1).add(&i1.mul(&d)).scale(c(0.5));
    Ok(delta1.sub(&sym))
}

/// Diagonal of the first correction as three reals
/// `(d₋, d_R, d₊)`; the middle entry equals the Rossby Hamiltonian profile.
pub fn d1_symbol(
    p: PhasePoint,
    profile: &CoriolisProfile,
    flow: &BackgroundFlow,
) -> Result<[f64; 3]> {
    let m = d1_matrix(p, profile, flow)?;
    Ok([m.0[0][0].re, m.0[1][1].re, m.0[2][2].re])
}
