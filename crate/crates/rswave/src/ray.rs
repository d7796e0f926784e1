//! Bicharacteristic ray tracing for the branch Hamiltonians.
//!
//! The Poincaré branches evolve under `τ± = ±√(ξ² + b²(x₂))`, the Rossby
//! branch under the ε-independent profile `ξ₁b′/(ξ²+b²) + ū·ξ` (times are in
//! the slow Rossby unit, the overall ε of the Rossby Hamiltonian divided
//! out). Integration is implicit midpoint with fixed-point iteration:
//! symplectic, second order, time-symmetric.

use crate::coriolis::CoriolisProfile;
use crate::error::{Error, Result};
use crate::flow::BackgroundFlow;
use crate::phase::PhasePoint;
use crate::symbol::{rossby_symbol_with_floor, tau_pm};
use crate::DEFAULT_GAP_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianKind {
    PoincarePlus,
    PoincareMinus,
    Rossby,
}

impl HamiltonianKind {
    pub fn label(&self) -> &'static str {
        match self {
            HamiltonianKind::PoincarePlus => "poincare_plus",
            HamiltonianKind::PoincareMinus => "poincare_minus",
            HamiltonianKind::Rossby => "rossby",
        }
    }
}

/// The Hamiltonian system of one branch.
pub struct RaySystem<'a> {
    pub kind: HamiltonianKind,
    pub profile: &'a CoriolisProfile,
    pub flow: &'a BackgroundFlow,
    pub gap_floor: f64,
}

impl<'a> RaySystem<'a> {
    pub fn new(
        kind: HamiltonianKind,
        profile: &'a CoriolisProfile,
        flow: &'a BackgroundFlow,
    ) -> Self {
        Self {
            kind,
            profile,
            flow,
            gap_floor: DEFAULT_GAP_FLOOR,
        }
    }

    pub fn hamiltonian(&self, p: PhasePoint) -> Result<f64> {
        match self.kind {
            HamiltonianKind::PoincarePlus => Ok(tau_pm(p, self.profile, 1.0)),
            HamiltonianKind::PoincareMinus => Ok(tau_pm(p, self.profile, -1.0)),
            HamiltonianKind::Rossby => {
                rossby_symbol_with_floor(p, self.profile, self.flow, self.gap_floor)
            }
        }
    }

    /// Gradient `(∂x₁H, ∂x₂H, ∂ξ₁H, ∂ξ₂H)`.
    pub fn grad(&self, p: PhasePoint) -> Result<[f64; 4]> {
        let b = self.profile.b(p.x2);
        let db = self.profile.db(p.x2);
        let rho2 = p.xi_norm_sqr() + b * b;
        match self.kind {
            HamiltonianKind::PoincarePlus | HamiltonianKind::PoincareMinus => {
                if rho2 < 1e-14 {
                    return Err(Error::GapViolation {
                        point: p,
                        gap: rho2,
                        floor: 1e-14,
                    });
                }
                let s = if self.kind == HamiltonianKind::PoincarePlus {
                    1.0
                } else {
                    -1.0
                };
                let rho = rho2.sqrt();
                Ok([0.0, s * b * db / rho, s * p.xi1 / rho, s * p.xi2 / rho])
            }
            HamiltonianKind::Rossby => {
                if rho2 < self.gap_floor {
                    return Err(Error::GapViolation {
                        point: p,
                        gap: rho2,
                        floor: self.gap_floor,
                    });
                }
                let d2b = self.profile.d2b(p.x2);
                let rho4 = rho2 * rho2;
                let g = self.flow.grad(p.x1, p.x2);
                let (u1, u2) = self.flow.u(p.x1, p.x2);
                let dx1 = g.d[0][0] * p.xi1 + g.d[0][1] * p.xi2;
                let dx2 = p.xi1 * (d2b / rho2 - 2.0 * b * db * db / rho4)
                    + g.d[1][0] * p.xi1
                    + g.d[1][1] * p.xi2;
                let dxi1 = db * (rho2 - 2.0 * p.xi1 * p.xi1) / rho4 + u1;
                let dxi2 = -2.0 * p.xi1 * p.xi2 * db / rho4 + u2;
                Ok([dx1, dx2, dxi1, dxi2])
            }
        }
    }

    /// Hamiltonian vector field `(ẋ, ξ̇) = (∂_ξH, −∂_xH)`.
    pub fn rhs(&self, p: PhasePoint) -> Result<[f64; 4]> {
        let g = self.grad(p)?;
        Ok([g[2], g[3], -g[0], -g[1]])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RayState {
    pub p: PhasePoint,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// The ray entered the near-singular region; the trajectory holds all
    /// accepted steps up to that point.
    GapViolation { point: PhasePoint, gap: f64 },
    StepRejected { t: f64 },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: HamiltonianKind,
    pub dt: f64,
    pub samples: Vec<RayState>,
    /// Hamiltonian value at each sample.
    pub h_values: Vec<f64>,
    pub termination: Termination,
}

const MIDPOINT_TOL: f64 = 1e-14;
const MIDPOINT_MAX_ITERS: usize = 50;

fn add_scaled(p: PhasePoint, f: &[f64; 4], s: f64) -> PhasePoint {
    PhasePoint::new(
        p.x1 + s * f[0],
        p.x2 + s * f[1],
        p.xi1 + s * f[2],
        p.xi2 + s * f[3],
    )
}

fn diff_norm(a: PhasePoint, b: PhasePoint) -> f64 {
    ((a.x1 - b.x1).powi(2)
        + (a.x2 - b.x2).powi(2)
        + (a.xi1 - b.xi1).powi(2)
        + (a.xi2 - b.xi2).powi(2))
    .sqrt()
}

/// Integrate a bicharacteristic for `steps` steps of size `dt`, recording all
/// accepted samples; terminates early on gap violation or solver failure.
pub fn integrate_partial(
    system: &RaySystem,
    initial: PhasePoint,
    dt: f64,
    steps: usize,
) -> Trajectory {
    let mut samples = Vec::with_capacity(steps + 1);
    let mut h_values = Vec::with_capacity(steps + 1);
    let mut termination = Termination::Completed;
    let mut z = initial;
    let mut t = 0.0;

    match system.hamiltonian(z) {
        Ok(h) => {
            samples.push(RayState { p: z, t });
            h_values.push(h);
        }
        Err(Error::GapViolation { gap, .. }) => {
            return Trajectory {
                kind: system.kind,
                dt,
                samples,
                h_values,
                termination: Termination::GapViolation { point: z, gap },
            }
        }
        Err(_) => unreachable!("ray Hamiltonians are total away from the gap"),
    }

    'steps: for _ in 0..steps {
        // Fixed-point solve of m = z + (dt/2)·F(m).
        let f0 = match system.rhs(z) {
            Ok(f) => f,
            Err(Error::GapViolation { point, gap, .. }) => {
                termination = Termination::GapViolation { point, gap };
                break 'steps;
            }
            Err(_) => unreachable!(),
        };
        let mut m = add_scaled(z, &f0, 0.5 * dt);
        let mut converged = false;
        for _ in 0..MIDPOINT_MAX_ITERS {
            let f = match system.rhs(m) {
                Ok(f) => f,
                Err(Error::GapViolation { point, gap, .. }) => {
                    termination = Termination::GapViolation { point, gap };
                    break 'steps;
                }
                Err(_) => unreachable!(),
            };
            let next = add_scaled(z, &f, 0.5 * dt);
            let delta = diff_norm(next, m);
            m = next;
            if delta <= MIDPOINT_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            termination = Termination::StepRejected { t };
            break;
        }
        // z_{n+1} = 2m − z_n.
        z = PhasePoint::new(
            2.0 * m.x1 - z.x1,
            2.0 * m.x2 - z.x2,
            2.0 * m.xi1 - z.xi1,
            2.0 * m.xi2 - z.xi2,
        );
        t += dt;
        match system.hamiltonian(z) {
            Ok(h) => {
                samples.push(RayState { p: z, t });
                h_values.push(h);
            }
            Err(Error::GapViolation { gap, .. }) => {
                termination = Termination::GapViolation { point: z, gap };
                break;
            }
            Err(_) => unreachable!(),
        }
    }

    Trajectory {
        kind: system.kind,
        dt,
        samples,
        h_values,
        termination,
    }
}

/// Strict integration: errors unless the full horizon was covered.
pub fn integrate(
    system: &RaySystem,
    initial: PhasePoint,
    duration: f64,
    dt: f64,
) -> Result<Trajectory> {
    assert!(dt.abs() > 0.0 && duration > 0.0);
    let steps = (duration / dt.abs()).round() as usize;
    let traj = integrate_partial(system, initial, dt, steps);
    match traj.termination {
        Termination::Completed => Ok(traj),
        Termination::GapViolation { point, gap } => Err(Error::GapViolation {
            point,
            gap,
            floor: system.gap_floor,
        }),
        Termination::StepRejected { t } => Err(Error::StepRejected {
            t,
            iters: MIDPOINT_MAX_ITERS,
        }),
    }
}

/// Scalar observables on phase space, for bracket evaluations.
pub trait ScalarObservable {
    fn eval(&self, p: PhasePoint) -> f64;
    /// `(∂x₁G, ∂x₂G, ∂ξ₁G, ∂ξ₂G)`.
    fn grad(&self, p: PhasePoint) -> [f64; 4];
}

pub struct Coordinate(pub crate::phase::PhaseVar);

impl ScalarObservable for Coordinate {
    fn eval(&self, p: PhasePoint) -> f64 {
        match self.0 {
            crate::phase::PhaseVar::X1 => p.x1,
            crate::phase::PhaseVar::X2 => p.x2,
            crate::phase::PhaseVar::Xi1 => p.xi1,
            crate::phase::PhaseVar::Xi2 => p.xi2,
        }
    }
    fn grad(&self, _p: PhasePoint) -> [f64; 4] {
        match self.0 {
            crate::phase::PhaseVar::X1 => [1.0, 0.0, 0.0, 0.0],
            crate::phase::PhaseVar::X2 => [0.0, 1.0, 0.0, 0.0],
            crate::phase::PhaseVar::Xi1 => [0.0, 0.0, 1.0, 0.0],
            crate::phase::PhaseVar::Xi2 => [0.0, 0.0, 0.0, 1.0],
        }
    }
}

impl ScalarObservable for RaySystem<'_> {
    fn eval(&self, p: PhasePoint) -> f64 {
        self.hamiltonian(p).unwrap_or(f64::NAN)
    }
    fn grad(&self, p: PhasePoint) -> [f64; 4] {
        RaySystem::grad(self, p).unwrap_or([f64::NAN; 4])
    }
}

/// `{H, G}(p) = ∂_ξH·∂_xG − ∂_xH·∂_ξG`.
pub fn poisson_bracket_scalar(
    system: &RaySystem,
    observable: &dyn ScalarObservable,
    p: PhasePoint,
) -> Result<f64> {
    let h = system.grad(p)?;
    let g = observable.grad(p);
    Ok(h[2] * g[0] + h[3] * g[1] - h[0] * g[2] - h[1] * g[3])
}

/// Confinement and conservation summary of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrappingReport {
    pub x2_sup: f64,
    pub x2_inf: f64,
    /// Least-squares linear drift rate of `x₁`.
    pub x1_drift_rate: f64,
    /// Max relative Hamiltonian deviation from its initial value.
    pub h_drift: f64,
    /// Max relative `ξ₁` deviation from its initial value.
    pub xi1_drift: f64,
}

pub fn trapping_diagnostic(traj: &Trajectory) -> TrappingReport {
    assert!(!traj.samples.is_empty(), "empty trajectory");
    let n = traj.samples.len();
    let h0 = traj.h_values[0];
    let xi10 = traj.samples[0].p.xi1;
    let mut x2_sup = f64::NEG_INFINITY;
    let mut x2_inf = f64::INFINITY;
    let mut h_drift: f64 = 0.0;
    let mut xi1_drift: f64 = 0.0;
    let (mut st, mut sx, mut stt, mut stx) = (0.0, 0.0, 0.0, 0.0);
    for (s, &h) in traj.samples.iter().zip(traj.h_values.iter()) {
        x2_sup = x2_sup.max(s.p.x2);
        x2_inf = x2_inf.min(s.p.x2);
        h_drift = h_drift.max((h - h0).abs() / h0.abs().max(1.0));
        xi1_drift = xi1_drift.max((s.p.xi1 - xi10).abs() / xi10.abs().max(1.0));
        st += s.t;
        sx += s.p.x1;
        stt += s.t * s.t;
        stx += s.t * s.p.x1;
    }
    let nf = n as f64;
    let denom = nf * stt - st * st;
    let x1_drift_rate = if denom.abs() > 0.0 {
        (nf * stx - st * sx) / denom
    } else {
        0.0
    };
    TrappingReport {
        x2_sup,
        x2_inf,
        x1_drift_rate,
        h_drift,
        xi1_drift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseVar;

    fn betap() -> CoriolisProfile {
        CoriolisProfile::betaplane(1.0)
    }

    #[test]
    fn poincare_equatorial_ray_is_exactly_linear() {
        // τ⁺, betaplane, start (0,0,1,0): b=0 on the ray, H = 1, ξ₁ = 1,
        // x₁(t) = t.
        let profile = betap();
        let flow = BackgroundFlow::zero();
        let sys = RaySystem::new(HamiltonianKind::PoincarePlus, &profile, &flow);
        let traj = integrate(&sys, PhasePoint::new(0.0, 0.0, 1.0, 0.0), 100.0, 1e-2).unwrap();
        let rep = trapping_diagnostic(&traj);
        assert!(rep.h_drift <= 1e-12);
        assert!(rep.xi1_drift <= 1e-12);
        for s in &traj.samples {
            assert!((s.p.x1 - s.t).abs() <= 1e-6 * s.t.max(1.0), "nonlinear escape");
            assert!(s.p.x2.abs() < 1e-12);
        }
        assert!((rep.x1_drift_rate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rossby_betaplane_ray_respects_invariant_circle() {
        // H = ξ₁/(ξ²+x₂²) and ξ₁ conserved force ξ₂²+x₂² = ξ₁/H − ξ₁².
        let profile = betap();
        let flow = BackgroundFlow::zero();
        let sys = RaySystem::new(HamiltonianKind::Rossby, &profile, &flow);
        let start = PhasePoint::new(0.0, 0.5, 1.0, 0.0);
        let dt = 1e-3;
        let traj = integrate(&sys, start, 1e4 * dt, dt).unwrap();
        let h0 = traj.h_values[0];
        let bound = (start.xi1 / h0 - start.xi1 * start.xi1).sqrt();
        let rep = trapping_diagnostic(&traj);
        assert!(rep.h_drift <= 1e-6, "H drift {}", rep.h_drift);
        assert!(rep.xi1_drift <= 1e-10, "xi1 drift {}", rep.xi1_drift);
        assert!(
            rep.x2_sup <= bound + 1e-6 && rep.x2_inf >= -bound - 1e-6,
            "trapping circle violated: [{}, {}] vs ±{}",
            rep.x2_inf,
            rep.x2_sup,
            bound
        );
    }

    #[test]
    fn second_order_convergence() {
        let profile = betap();
        let flow = BackgroundFlow::zero();
        let sys = RaySystem::new(HamiltonianKind::Rossby, &profile, &flow);
        let start = PhasePoint::new(0.0, 0.8, 1.0, 0.3);
        let t_end = 2.0;
        let exact = integrate(&sys, start, t_end, 1e-5).unwrap();
        let ze = exact.samples.last().unwrap().p;
        let mut errs = Vec::new();
        for dt in [2e-3, 1e-3] {
            let traj = integrate(&sys, start, t_end, dt).unwrap();
            let z = traj.samples.last().unwrap().p;
            errs.push(diff_norm(z, ze));
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (3.0..5.5).contains(&ratio),
            "expected ~4x error reduction, got {ratio} ({errs:?})"
        );
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let profile = CoriolisProfile::monotone(1.0, 0.3, 0.7);
        let flow = BackgroundFlow::bump(0.3, 1.2);
        for kind in [HamiltonianKind::PoincarePlus, HamiltonianKind::Rossby] {
            let sys = RaySystem::new(kind, &profile, &flow);
            let start = PhasePoint::new(0.2, 0.9, 1.1, -0.2);
            let fwd = integrate(&sys, start, 3.0, 1e-3).unwrap();
            let end = fwd.samples.last().unwrap().p;
            let bwd = integrate_partial(&sys, end, -1e-3, 3000);
            assert_eq!(bwd.termination, Termination::Completed);
            let back = bwd.samples.last().unwrap().p;
            assert!(
                diff_norm(back, start) <= 1e-8,
                "reversal error {:.2e} for {kind:?}",
                diff_norm(back, start)
            );
        }
    }

    #[test]
    fn bracket_values() {
        let profile = CoriolisProfile::constant(4.0);
        let flow = BackgroundFlow::zero();
        let sys = RaySystem::new(HamiltonianKind::PoincarePlus, &profile, &flow);
        // {τ⁺, x₁} = ξ₁/τ⁺ with ξ=(3,0), b=4 → 3/5.
        let p = PhasePoint::new(0.0, 0.0, 3.0, 0.0);
        let v = poisson_bracket_scalar(&sys, &Coordinate(PhaseVar::X1), p).unwrap();
        assert!((v - 0.6).abs() < 1e-14);

        // {τ⁺, τ⁺} = 0.
        let profile2 = betap();
        let sys2 = RaySystem::new(HamiltonianKind::PoincarePlus, &profile2, &flow);
        let q = PhasePoint::new(0.3, 1.2, 0.7, -0.4);
        let v = poisson_bracket_scalar(&sys2, &sys2, q).unwrap();
        assert!(v.abs() < 1e-13);

        // {τ^R, ξ₁} = 0 by x₁-independence (betaplane, no flow).
        let sysr = RaySystem::new(HamiltonianKind::Rossby, &profile2, &flow);
        let v = poisson_bracket_scalar(&sysr, &Coordinate(PhaseVar::Xi1), q).unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn rossby_ray_aborts_on_gap_violation_with_partial_trajectory() {
        // On the betaplane ξ²+b² is conserved along Rossby rays, so a
        // crossing needs a profile with varying b′. Calibrate the floor
        // from the orbit's actual gap range.
        let profile = CoriolisProfile::monotone(1.0, -0.45, 2.0);
        let flow = BackgroundFlow::zero();
        // ξ₂ > 0 sends the ray toward the equator where b′ is small, so the
        // conserved relation ρ² = ξ₁·b′(x₂)/H forces the gap down.
        let start = PhasePoint::new(0.0, 0.8, 1.0, 0.5);
        let sys = RaySystem::new(HamiltonianKind::Rossby, &profile, &flow);
        let probe = integrate(&sys, start, 30.0, 1e-3).unwrap();
        let gap_of = |p: PhasePoint| crate::symbol::gap(p, &profile);
        let min_gap = probe
            .samples
            .iter()
            .map(|s| gap_of(s.p))
            .fold(f64::INFINITY, f64::min);
        let start_gap = gap_of(start);
        assert!(min_gap < 0.9 * start_gap, "orbit does not vary its gap");

        let mut sys = RaySystem::new(HamiltonianKind::Rossby, &profile, &flow);
        sys.gap_floor = 0.5 * (min_gap + start_gap);
        let traj = integrate_partial(&sys, start, 1e-3, 30_000);
        match traj.termination {
            Termination::GapViolation { .. } => {
                assert!(!traj.samples.is_empty());
            }
            other => panic!("expected gap violation, got {other:?}"),
        }
        assert!(integrate(&sys, start, 30.0, 1e-3).is_err());
    }

    #[test]
    fn monotone_profile_rossby_ray_stays_bounded() {
        // Non-betaplane profile: no closed-form bound, but the ray must stay
        // confined in x₂; sup/inf agree at halved dt.
        let profile = CoriolisProfile::monotone(1.0, -0.3, 2.0);
        let flow = BackgroundFlow::zero();
        let sys = RaySystem::new(HamiltonianKind::Rossby, &profile, &flow);
        let start = PhasePoint::new(0.0, 0.0, 1.0, 0.0);
        let a = integrate(&sys, start, 50.0, 2e-3).unwrap();
        let b = integrate(&sys, start, 50.0, 1e-3).unwrap();
        let ra = trapping_diagnostic(&a);
        let rb = trapping_diagnostic(&b);
        assert!(ra.x2_sup.is_finite() && ra.x2_inf.is_finite());
        assert!(ra.x2_sup.abs() < 10.0 && ra.x2_inf.abs() < 10.0);
        assert!((ra.x2_sup - rb.x2_sup).abs() < 1e-4);
        assert!((ra.x2_inf - rb.x2_inf).abs() < 1e-4);
    }
}
