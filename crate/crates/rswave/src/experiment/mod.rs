//! Reproducible experiment drivers.
//!
//! Every experiment consumes an [`ExperimentConfig`] plus an output
//! directory, writes CSV data and a `summary.json` with one entry per
//! acceptance gate, and returns the summary. All randomness is derived from
//! the configured seed, and reductions run in a fixed order, so re-running a
//! configuration reproduces the artifacts byte for byte.

mod diag_sweep;
mod mourre_run;
mod moyal_d1;
mod pde_run;
mod rays;
mod symbol_check;

pub use pde_run::{PdeGeometry, PoincareLaunch};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use serde::Serialize;
use std::path::Path;

/// One acceptance gate: a measured value against its pinned threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub name: String,
    /// Which acceptance criterion this gate realizes.
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<="` or `">="`.
    pub direction: String,
    pub pass: bool,
}

impl Gate {
    pub fn at_most(name: &str, criterion: &str, value: f64, threshold: f64) -> Self {
        Gate {
            name: name.to_string(),
            criterion: criterion.to_string(),
            value,
            threshold,
            direction: "<=".to_string(),
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: &str, criterion: &str, value: f64, threshold: f64) -> Self {
        Gate {
            name: name.to_string(),
            criterion: criterion.to_string(),
            value,
            threshold,
            direction: ">=".to_string(),
            pass: value >= threshold,
        }
    }
}

/// Reported, non-gated measurements.
#[derive(Debug, Clone, Serialize)]
pub struct Note {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub pass: bool,
    pub gates: Vec<Gate>,
    pub notes: Vec<Note>,
}

impl Summary {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Summary {
            experiment: kind.label().to_string(),
            seed,
            pass: true,
            gates: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) {
        self.pass &= gate.pass;
        self.gates.push(gate);
    }

    pub fn note(&mut self, name: &str, value: f64) {
        self.notes.push(Note {
            name: name.to_string(),
            value,
        });
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("summary.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Io(format!("summary serialization: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// Run one experiment, writing artifacts under `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary> {
    let violations = config.check();
    if !violations.is_empty() {
        return Err(Error::ConfigInvalid(violations));
    }
    std::fs::create_dir_all(out_dir)?;
    let summary = match config.kind {
        ExperimentKind::SymbolCheck => symbol_check::run(config, out_dir)?,
        ExperimentKind::MoyalD1 => moyal_d1::run(config, out_dir)?,
        ExperimentKind::DiagSweep => diag_sweep::run(config, out_dir)?,
        ExperimentKind::Rays => rays::run(config, out_dir)?,
        ExperimentKind::Mourre => mourre_run::run(config, out_dir)?,
        ExperimentKind::PdeTrap => pde_run::run_trap(config, out_dir)?,
        ExperimentKind::PdeDisperse => pde_run::run_disperse(config, out_dir)?,
    };
    summary.write(out_dir)?;
    Ok(summary)
}

/// Logarithmically spaced sample times.
pub(crate) fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
