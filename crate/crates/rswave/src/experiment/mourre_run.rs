//! Commutator positivity and propagation decay runs.
//!
//! The canonical pair is the 1-D reduction `H = ε·D₁`, `A = x₁`; the wave
//! case checks `H = Op(τ⁺)` against the symbol minimum of `ξ₁/τ⁺` on the
//! microlocalized window.

use super::Summary;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::grid::SpatialGrid;
use crate::io::CsvWriter;
use crate::mourre::{
    position_operator, positivity_check, propagation_decay, EnergyCutoff, SpectralWindow,
};
use crate::packet::{gaussian_scalar, mode_gaussian_state};
use crate::phase::PhasePoint;
use crate::rng::Stream;
use crate::symbol::tau_pm;
use crate::weyl::{quantize_affine, quantize_scalar, AffineSymbol, AffineTerm, Coeff, TauSymbol, XiFactor};
use num_complex::Complex64 as C64;
use std::path::Path;

/// 1-D reduction geometry.
const LINE_N: usize = 1024;
const LINE_L: f64 = 128.0;

pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary> {
    let mut summary = Summary::new(config.kind, config.seed);
    let eps = config
        .eps
        .as_ref()
        .and_then(|v| v.first().copied())
        .unwrap_or(0.1);

    canonical_pair(config, out_dir, eps, &mut summary)?;
    tau_plus_window(config, eps, &mut summary)?;
    Ok(summary)
}

fn canonical_pair(
    config: &ExperimentConfig,
    out_dir: &Path,
    eps: f64,
    summary: &mut Summary,
) -> Result<()> {
    let grid = SpatialGrid::line(LINE_N, LINE_L);
    let h = quantize_affine(
        &AffineSymbol {
            ncomp: 1,
            terms: vec![AffineTerm {
                row: 0,
                col: 0,
                xi: XiFactor::Xi1,
                coeff: Coeff::Const(C64::ONE),
            }],
        },
        eps,
        grid,
    );
    let a = position_operator(grid, eps, true);
    let window = SpectralWindow::new(&h, 1.5 * eps, 6.5 * eps)?;
    // Gaussian spectra with the window edges five widths out: the window
    // projection is exact to ~1e−6 in amplitude and the states stay
    // Gaussian-small at the seam, which is what the 1e−12 budget needs.
    let states: Vec<Vec<C64>> = (0..8)
        .map(|i| mode_gaussian_state(grid, 4.0, 0.4, -10.5 + 3.0 * i as f64))
        .collect();
    let theta = positivity_check(&h, &a, &window, &states)?;
    summary.push(super::Gate::at_most(
        "canonical_theta_error",
        "6",
        (theta - eps).abs(),
        config.threshold("canonical_theta_error", 1e-12),
    ));
    summary.note("canonical_theta", theta);

    // Decay over one decade of t with θ′ = ε/2 < θ; transport covers less
    // than half the box at the final time.
    let g = EnergyCutoff {
        lo: 1.7 * eps,
        hi: 6.3 * eps,
    };
    // One decade of times; the launch region is capped and the box is wide
    // enough that the wrapped path stays longer than the direct one at the
    // final time, so the seam never re-couples the cutoffs.
    let times = super::logspace(60.0, 600.0, 9);
    let cap = Some(10.0);
    let fit = propagation_decay(&h, &a, &window, g, 0.0, 0.25 * eps, &times, cap)?;
    let mut csv = CsvWriter::create(&out_dir.join("mourre_decay.csv"), &["t", "norm"])?;
    for (t, n) in &fit.samples {
        csv.row(&[*t, *n])?;
    }
    csv.finish()?;
    summary.push(super::Gate::at_least(
        "decay_fitted_exponent",
        "6",
        fit.fitted_exponent,
        config.threshold("decay_fitted_exponent", 2.0),
    ));
    let min_norm = fit
        .samples
        .iter()
        .map(|(_, n)| *n)
        .fold(f64::INFINITY, f64::min);
    summary.push(super::Gate::at_most(
        "decay_final_norm",
        "6",
        min_norm,
        config.threshold("decay_final_norm", 1e-3),
    ));

    // Negative control: θ′ above θ means the moving cutoff overtakes the
    // transport and nothing decays.
    let fit_bad = propagation_decay(&h, &a, &window, g, 0.0, 2.0 * eps, &times, cap)?;
    let mut csv = CsvWriter::create(
        &out_dir.join("mourre_decay_negative_control.csv"),
        &["t", "norm"],
    )?;
    for (t, n) in &fit_bad.samples {
        csv.row(&[*t, *n])?;
    }
    csv.finish()?;
    let control_min = fit_bad
        .samples
        .iter()
        .map(|(_, n)| *n)
        .fold(f64::INFINITY, f64::min);
    summary.push(super::Gate::at_least(
        "negative_control_min_norm",
        "6",
        control_min,
        config.threshold("negative_control_min_norm", 0.1),
    ));
    summary.note("canonical_theta_prime", 0.25 * eps);
    summary.note("canonical_window_lo", 1.5 * eps);
    summary.note("canonical_window_hi", 6.5 * eps);
    summary.note("canonical_fitted_exponent", fit.fitted_exponent);
    Ok(())
}

fn tau_plus_window(config: &ExperimentConfig, eps: f64, summary: &mut Summary) -> Result<()> {
    let grid = SpatialGrid::square(32, 1.8);
    let profile = config.profile;
    let h = quantize_scalar(&TauSymbol { profile: &profile, sign: 1.0 }, eps, grid)?;
    let a = position_operator(grid, eps, true);
    let (win_lo, win_hi) = (0.9, 1.5);
    let window = SpectralWindow::new(&h, win_lo, win_hi)?;

    // Microlocalized ensemble inside the window with ξ₁ bounded below.
    let mut stream = Stream::derive(config.seed, "mourre-tau-ensemble", 0);
    let mut states = Vec::new();
    let mut symbol_min = f64::INFINITY;
    while states.len() < 12 {
        let p = PhasePoint::new(
            stream.uniform(-0.3, 0.3),
            stream.uniform(-0.3, 0.3),
            stream.uniform(1.0, 1.2),
            stream.uniform(-0.3, 0.3),
        );
        let tau = tau_pm(p, &profile, 1.0);
        if !(1.1..=1.3).contains(&tau) || p.xi1 < 0.9 {
            continue;
        }
        symbol_min = symbol_min.min(p.xi1 / tau);
        states.push(gaussian_scalar(grid, eps, p));
    }
    let theta = positivity_check(&h, &a, &window, &states)?;
    summary.push(super::Gate::at_least(
        "tau_theta_positive",
        "7",
        theta,
        config.threshold("tau_theta_positive", 1e-6),
    ));
    summary.push(super::Gate::at_most(
        "tau_theta_vs_symbol_min",
        "7",
        (theta / eps - symbol_min).abs(),
        config.threshold("tau_theta_vs_symbol_min", 2.0 * eps),
    ));
    summary.note("tau_theta_over_eps", theta / eps);
    summary.note("tau_symbol_min", symbol_min);
    summary.note("tau_window_lo", win_lo);
    summary.note("tau_window_hi", win_hi);
    Ok(())
}
