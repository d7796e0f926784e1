//! Pointwise eigenstructure verification over a random phase-space sample.

use super::Summary;
use crate::algebra::Mat3;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io::CsvWriter;
use crate::phase::PhasePoint;
use crate::rng::Stream;
use crate::symbol::{gap, leading_eigensystem_with_floor, leading_symbol, tau_pm, Branch};
use std::path::Path;

pub const SAMPLE_COUNT: usize = 1000;

pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary> {
    let mut summary = Summary::new(config.kind, config.seed);
    let profile = &config.profile;
    let mut stream = Stream::derive(config.seed, "symbol-check", 0);

    let mut csv = CsvWriter::create(
        &out_dir.join("symbol_check.csv"),
        &["x2", "xi1", "xi2", "eigen_residual", "orthonormality", "eigenvalue_error"],
    )?;

    let mut max_residual: f64 = 0.0;
    let mut max_orth: f64 = 0.0;
    let mut max_eig_err: f64 = 0.0;
    let mut max_gap_spacing_err: f64 = 0.0;
    let mut count = 0usize;
    while count < SAMPLE_COUNT {
        let p = PhasePoint::new(
            stream.uniform(-3.0, 3.0),
            stream.uniform(-3.0, 3.0),
            stream.uniform(-3.0, 3.0),
            stream.uniform(-3.0, 3.0),
        );
        // Gap-respecting sample (generously above the floor so the closed
        // forms stay well conditioned).
        if gap(p, profile) < 1e-4 {
            continue;
        }
        count += 1;
        let frame = leading_eigensystem_with_floor(p, profile, config.gap_floor)?;
        let a0 = leading_symbol(p, profile);
        let tau = tau_pm(p, profile, 1.0);

        let mut residual: f64 = 0.0;
        for br in Branch::ALL {
            let scale = frame.branch_value(br).abs().max(1.0);
            residual = residual.max(frame.residual(&a0, br) / scale);
        }
        let gram = frame.vectors.adjoint().mul(&frame.vectors);
        let orth = gram.sub(&Mat3::identity()).norm();
        let eig_err = (frame.lambda[0] + tau)
            .abs()
            .max(frame.lambda[1].abs())
            .max((frame.lambda[2] - tau).abs());
        // λ₊ − λ₀ = λ₀ − λ₋ = τ.
        let spacing = ((frame.lambda[2] - frame.lambda[1]) - (frame.lambda[1] - frame.lambda[0]))
            .abs();
        max_gap_spacing_err = max_gap_spacing_err.max(spacing);

        csv.row(&[p.x2, p.xi1, p.xi2, residual, orth, eig_err])?;
        max_residual = max_residual.max(residual);
        max_orth = max_orth.max(orth);
        max_eig_err = max_eig_err.max(eig_err);
    }
    csv.finish()?;

    summary.push(super::Gate::at_most(
        "eigen_residual_max",
        "1",
        max_residual,
        config.threshold("eigen_residual_max", 1e-12),
    ));
    summary.push(super::Gate::at_most(
        "eigenvalue_error_max",
        "1",
        max_eig_err,
        config.threshold("eigenvalue_error_max", 1e-12),
    ));
    summary.push(super::Gate::at_most(
        "orthonormality_max",
        "1",
        max_orth,
        config.threshold("orthonormality_max", 1e-12),
    ));
    summary.note("eigenvalue_spacing_error_max", max_gap_spacing_err);
    Ok(summary)
}
