//! Residual scaling of the operator-level diagonalization under an ε-sweep.

use super::Summary;
use crate::config::ExperimentConfig;
use crate::coriolis::CoriolisProfile;
use crate::diag::{fit_loglog_slope, offdiag_residual, standard_ensemble};
use crate::error::Result;
use crate::flow::BackgroundFlow;
use crate::grid::SpatialGrid;
use crate::io::CsvWriter;
use std::path::Path;

pub const DEFAULT_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
pub const ENSEMBLE_SIZE: usize = 20;
/// Microlocal radius of the test ensemble in ξ; keeps clear of both the gap
/// corner and the gauge seam.
pub const XI_MAG: f64 = 1.0;

/// Per-ε box half-length: large enough for the packet envelope, small
/// enough that the frequency grid resolves `|ξ| = XI_MAG` oscillations.
pub fn box_for_eps(eps: f64, n: usize) -> f64 {
    crate::diag::microlocal_box(eps, n, XI_MAG)
}

pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary> {
    let mut summary = Summary::new(config.kind, config.seed);
    let eps_list = config
        .eps
        .clone()
        .unwrap_or_else(|| DEFAULT_EPS.to_vec());
    let n = config.grid.map(|g| g.n1).unwrap_or(32);
    let profile = config.profile;
    let flow = config.flow;
    let control_profile = CoriolisProfile::constant(2.0);
    let control_flow = BackgroundFlow::zero();

    let mut csv = CsvWriter::create(
        &out_dir.join("diag_sweep.csv"),
        &[
            "eps",
            "residual",
            "residual_no_correction",
            "unitarity_defect",
            "control_residual",
            "slope_window_estimate",
        ],
    )?;

    let mut residuals = Vec::new();
    let mut residuals_nod1 = Vec::new();
    let mut unit_defects = Vec::new();
    let mut control_max: f64 = 0.0;
    for &eps in &eps_list {
        let l = box_for_eps(eps, n);
        let grid = SpatialGrid::square(n, l);
        let ensemble = standard_ensemble(grid, XI_MAG, ENSEMBLE_SIZE, config.seed);
        let sample = offdiag_residual(eps, grid, &profile, &flow, &ensemble)?;
        let control = offdiag_residual(eps, grid, &control_profile, &control_flow, &ensemble)?;
        control_max = control_max.max(control.residual);
        residuals.push(sample.residual);
        residuals_nod1.push(sample.residual_without_correction);
        unit_defects.push(sample.unitarity_defect);

        let slope_window = if residuals.len() >= 2 {
            let k = residuals.len();
            fit_loglog_slope(&eps_list[k - 2..k], &residuals[k - 2..k])
        } else {
            f64::NAN
        };
        csv.row(&[
            eps,
            sample.residual,
            sample.residual_without_correction,
            sample.unitarity_defect,
            control.residual,
            slope_window,
        ])?;
    }
    csv.finish()?;

    let slope = fit_loglog_slope(&eps_list, &residuals);
    let slope_nod1 = fit_loglog_slope(&eps_list, &residuals_nod1);
    let slope_unit = fit_loglog_slope(&eps_list, &unit_defects);

    summary.push(super::Gate::at_least(
        "residual_slope",
        "3",
        slope,
        config.threshold("residual_slope", 1.8),
    ));
    summary.push(super::Gate::at_most(
        "residual_slope_without_correction",
        "3",
        slope_nod1,
        config.threshold("residual_slope_without_correction", 1.2),
    ));
    summary.push(super::Gate::at_most(
        "control_residual_max",
        "3",
        control_max,
        config.threshold("control_residual_max", 1e-10),
    ));
    summary.note("unitarity_defect_slope", slope_unit);
    for (i, &eps) in eps_list.iter().enumerate() {
        summary.note(&format!("residual_at_{eps}"), residuals[i]);
    }
    Ok(summary)
}
