//! First-correction sweep: the kernel-branch entry of `D₁` against the
//! Rossby Hamiltonian, across profiles and flows.

use super::Summary;
use crate::config::ExperimentConfig;
use crate::coriolis::CoriolisProfile;
use crate::error::Result;
use crate::flow::BackgroundFlow;
use crate::io::CsvWriter;
use crate::moyal::{d1_symbol, i1_symbol, FrameSymbol};
use crate::phase::PhasePoint;
use crate::rng::Stream;
use crate::symbol::{gap, rossby_symbol};
use std::path::Path;

pub const POINTS_PER_CASE: usize = 100;

pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary> {
    let mut summary = Summary::new(config.kind, config.seed);
    // The sweep always covers the pinned case matrix: betaplane and
    // non-betaplane, with and without flow.
    let profiles: [(&str, CoriolisProfile); 2] = [
        ("betaplane", CoriolisProfile::betaplane(1.0)),
        ("monotone", CoriolisProfile::monotone(1.0, 0.3, 0.7)),
    ];
    let flows: [(&str, BackgroundFlow); 2] = [
        ("zero", BackgroundFlow::zero()),
        ("bump", BackgroundFlow::bump(0.4, 1.5)),
    ];

    let mut csv = CsvWriter::create(
        &out_dir.join("moyal_d1.csv"),
        &[
            "case",
            "x1",
            "x2",
            "xi1",
            "xi2",
            "d1_minus",
            "d1_rossby",
            "d1_plus",
            "rossby_symbol",
            "difference",
        ],
    )?;

    let mut max_diff: f64 = 0.0;
    let mut max_i1_defect: f64 = 0.0;
    let mut case_idx = 0.0;
    for (pname, profile) in &profiles {
        for (fname, flow) in &flows {
            let mut stream =
                Stream::derive(config.seed, &format!("moyal-d1/{pname}/{fname}"), 0);
            let frame = FrameSymbol { profile };
            let mut count = 0usize;
            while count < POINTS_PER_CASE {
                let p = PhasePoint::new(
                    stream.uniform(-2.0, 2.0),
                    stream.uniform(-2.0, 2.0),
                    stream.uniform(-2.0, 2.0),
                    stream.uniform(-2.0, 2.0),
                );
                // Keep clear of the gap corner and the ξ = 0 gauge seam.
                if gap(p, profile) < 0.09 || p.xi_norm_sqr() < 0.09 {
                    continue;
                }
                count += 1;
                let d1 = d1_symbol(p, profile, flow)?;
                let want = rossby_symbol(p, profile, flow)?;
                let diff = (d1[1] - want).abs();
                max_diff = max_diff.max(diff);
                // U*U is self-adjoint, so I₁ must be Hermitian-valued.
                let i1 = i1_symbol(&frame, p)?;
                max_i1_defect = max_i1_defect.max(i1.sub(&i1.adjoint()).norm());
                csv.row(&[
                    case_idx, p.x1, p.x2, p.xi1, p.xi2, d1[0], d1[1], d1[2], want, diff,
                ])?;
            }
            case_idx += 1.0;
        }
    }
    csv.finish()?;

    summary.push(super::Gate::at_most(
        "rossby_recovery_max_diff",
        "2",
        max_diff,
        config.threshold("rossby_recovery_max_diff", 1e-8),
    ));
    summary.push(super::Gate::at_most(
        "i1_selfadjoint_defect_max",
        "2",
        max_i1_defect,
        config.threshold("i1_selfadjoint_defect_max", 1e-10),
    ));
    Ok(summary)
}
