//! Ray-tracing acceptance runs: Rossby trapping and Poincaré escape.

use super::Summary;
use crate::config::ExperimentConfig;
use crate::coriolis::CoriolisProfile;
use crate::error::Result;
use crate::flow::BackgroundFlow;
use crate::io::CsvWriter;
use crate::phase::PhasePoint;
use crate::ray::{
    integrate, trapping_diagnostic, HamiltonianKind, RaySystem, Trajectory,
};
use std::path::Path;

pub const ROSSBY_DT: f64 = 5e-4;
pub const ROSSBY_STEPS: usize = 10_000;
pub const POINCARE_DT: f64 = 1e-3;
pub const POINCARE_T: f64 = 100.0;

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut csv = CsvWriter::create(
        path,
        &["t", "x1", "x2", "xi1", "xi2", "H", "xi1_conserved_flag"],
    )?;
    let xi10 = traj.samples[0].p.xi1;
    for (s, &h) in traj.samples.iter().zip(traj.h_values.iter()) {
        let flag = if (s.p.xi1 - xi10).abs() <= 1e-10 { 1.0 } else { 0.0 };
        csv.row(&[s.t, s.p.x1, s.p.x2, s.p.xi1, s.p.xi2, h, flag])?;
    }
    csv.finish()
}

pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary> {
    let mut summary = Summary::new(config.kind, config.seed);
    let flow = BackgroundFlow::zero();
    let betaplane = CoriolisProfile::betaplane(1.0);

    // Rossby trapping on the betaplane: the invariant circle
    // ξ₂² + x₂² = ξ₁/H − ξ₁² bounds |x₂|.
    let start = PhasePoint::new(0.0, 0.5, 1.0, 0.0);
    let sys = RaySystem::new(HamiltonianKind::Rossby, &betaplane, &flow);
    let traj = integrate(&sys, start, ROSSBY_STEPS as f64 * ROSSBY_DT, ROSSBY_DT)?;
    write_trajectory(&out_dir.join("ray_rossby.csv"), &traj)?;
    let rep = trapping_diagnostic(&traj);
    let h0 = traj.h_values[0];
    let bound = (start.xi1 / h0 - start.xi1 * start.xi1).sqrt();
    let excess = (rep.x2_sup - bound).max(-bound - rep.x2_inf).max(0.0);
    summary.push(super::Gate::at_most(
        "rossby_circle_excess",
        "4",
        excess,
        config.threshold("rossby_circle_excess", 1e-6),
    ));
    summary.push(super::Gate::at_most(
        "rossby_h_drift",
        "4",
        rep.h_drift,
        config.threshold("rossby_h_drift", 1e-6),
    ));
    summary.push(super::Gate::at_most(
        "rossby_xi1_drift",
        "4",
        rep.xi1_drift,
        config.threshold("rossby_xi1_drift", 1e-10),
    ));

    // Poincaré escape: both polarizations, x₁(t) linear at rate ξ₁/τ±.
    for (kind, name) in [
        (HamiltonianKind::PoincarePlus, "ray_poincare_plus.csv"),
        (HamiltonianKind::PoincareMinus, "ray_poincare_minus.csv"),
    ] {
        let sys = RaySystem::new(kind, &betaplane, &flow);
        let start = PhasePoint::new(0.0, 0.0, 1.0, 0.0);
        let traj = integrate(&sys, start, POINCARE_T, POINCARE_DT)?;
        write_trajectory(&out_dir.join(name), &traj)?;
        let rate = start.xi1 / traj.h_values[0];
        let mut linear_dev: f64 = 0.0;
        for s in &traj.samples {
            linear_dev = linear_dev.max((s.p.x1 - rate * s.t).abs());
        }
        let rep = trapping_diagnostic(&traj);
        summary.push(super::Gate::at_most(
            &format!("{}_linear_deviation", kind.label()),
            "5",
            linear_dev,
            config.threshold("poincare_linear_deviation", 1e-6),
        ));
        summary.note(&format!("{}_drift_rate", kind.label()), rep.x1_drift_rate);
        summary.note(&format!("{}_rate_expected", kind.label()), rate);
    }

    // Non-betaplane confinement, reported (no closed-form bound is claimed).
    let monotone = CoriolisProfile::monotone(1.0, 0.3, 0.7);
    let sys = RaySystem::new(HamiltonianKind::Rossby, &monotone, &flow);
    let traj = integrate(&sys, PhasePoint::new(0.0, 0.3, 1.0, 0.0), 50.0, 1e-3)?;
    write_trajectory(&out_dir.join("ray_rossby_monotone.csv"), &traj)?;
    let rep = trapping_diagnostic(&traj);
    summary.note("monotone_x2_sup", rep.x2_sup);
    summary.note("monotone_x2_inf", rep.x2_inf);
    summary.note("monotone_h_drift", rep.h_drift);

    Ok(summary)
}
