//! Experiment configuration: TOML parsing and full validation.
//!
//! Validation is non-throwing in the sense required for tooling: it returns
//! every violated constraint, not only the first one.

use crate::coriolis::CoriolisProfile;
use crate::flow::BackgroundFlow;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SymbolCheck,
    MoyalD1,
    DiagSweep,
    Rays,
    Mourre,
    PdeTrap,
    PdeDisperse,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::SymbolCheck,
        ExperimentKind::MoyalD1,
        ExperimentKind::DiagSweep,
        ExperimentKind::Rays,
        ExperimentKind::Mourre,
        ExperimentKind::PdeTrap,
        ExperimentKind::PdeDisperse,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::SymbolCheck => "symbol_check",
            ExperimentKind::MoyalD1 => "moyal_d1",
            ExperimentKind::DiagSweep => "diag_sweep",
            ExperimentKind::Rays => "rays",
            ExperimentKind::Mourre => "mourre",
            ExperimentKind::PdeTrap => "pde_trap",
            ExperimentKind::PdeDisperse => "pde_disperse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub l1: f64,
    pub l2: f64,
}

fn default_seed() -> u64 {
    12345
}

fn default_gap_floor() -> f64 {
    crate::DEFAULT_GAP_FLOOR
}

/// A fully parsed experiment configuration. Geometry fields left out of the
/// file fall back to the per-experiment defaults pinned in
/// [`crate::experiment`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_profile")]
    pub profile: CoriolisProfile,
    #[serde(default = "default_flow")]
    pub flow: BackgroundFlow,
    /// ε values; the per-experiment default list is used when empty is not
    /// permitted (an explicitly empty list is a validation error).
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_gap_floor")]
    pub gap_floor: f64,
    /// Per-gate threshold overrides, keyed by gate name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_profile() -> CoriolisProfile {
    CoriolisProfile::betaplane(1.0)
}

fn default_flow() -> BackgroundFlow {
    BackgroundFlow::Zero
}

impl ExperimentConfig {
    pub fn minimal(kind: ExperimentKind) -> Self {
        Self {
            kind,
            seed: default_seed(),
            profile: default_profile(),
            flow: default_flow(),
            eps: None,
            grid: None,
            gap_floor: default_gap_floor(),
            tolerances: BTreeMap::new(),
        }
    }

    pub fn threshold(&self, gate: &str, default: f64) -> f64 {
        self.tolerances.get(gate).copied().unwrap_or(default)
    }

    /// Collect every constraint violation.
    pub fn check(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if let Some(eps) = &self.eps {
            if eps.is_empty() {
                errors.push("eps: list must not be empty".to_string());
            }
            for &e in eps {
                if !(e > 0.0 && e <= 0.5) {
                    errors.push(format!("eps = {e}: eps must be in (0, 0.5]"));
                }
            }
        }
        if !(self.gap_floor > 0.0) {
            errors.push(format!("gap_floor = {}: must be > 0", self.gap_floor));
        }
        if let Some(g) = &self.grid {
            for (name, n) in [("n1", g.n1), ("n2", g.n2)] {
                if !(n == 1 && name == "n2") && !crate::grid::valid_axis_size(n) {
                    errors.push(format!(
                        "grid.{name} = {n}: must be even, >= 8, with prime factors 2/3/5"
                    ));
                }
            }
            if !(g.l1 > 0.0) {
                errors.push(format!("grid.l1 = {}: must be > 0", g.l1));
            }
            if !(g.l2 > 0.0) {
                errors.push(format!("grid.l2 = {}: must be > 0", g.l2));
            }
        }
        let domain = self.grid.map(|g| g.l2).unwrap_or(8.0);
        if let Err(mut es) = self.profile.validate(domain, 256) {
            errors.append(&mut es);
        }
        if let Err(mut es) = self.flow.validate(domain, 32) {
            errors.append(&mut es);
        }
        errors
    }
}

/// Parse and validate a configuration document, reporting all violations.
pub fn validate(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| vec![e.to_string()])?;
    let errors = config.check();
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_betaplane_config_parses_with_defaults() {
        let cfg = validate(
            r#"
kind = "symbol_check"
[profile]
kind = "betaplane"
beta = 1.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::SymbolCheck);
        assert_eq!(cfg.seed, 12345);
        assert_eq!(cfg.gap_floor, crate::DEFAULT_GAP_FLOOR);
        assert!(cfg.flow.is_zero());
    }

    #[test]
    fn out_of_range_eps_is_named() {
        let err = validate(
            r#"
kind = "rays"
eps = [0.9]
"#,
        )
        .unwrap_err();
        assert!(err.iter().any(|e| e.contains("eps must be in (0, 0.5]")), "{err:?}");
    }

    #[test]
    fn unknown_profile_kind_lists_options() {
        let err = validate(
            r#"
kind = "rays"
[profile]
kind = "parabolic"
"#,
        )
        .unwrap_err();
        assert!(
            err[0].contains("betaplane") && err[0].contains("monotone"),
            "expected enumerated options, got {err:?}"
        );
    }

    #[test]
    fn all_violations_are_reported_together() {
        let err = validate(
            r#"
kind = "diag_sweep"
eps = [0.9, -0.1]
gap_floor = 0.0
[grid]
n1 = 14
n2 = 32
l1 = 2.0
l2 = 2.0
"#,
        )
        .unwrap_err();
        assert!(err.len() >= 4, "expected all violations, got {err:?}");
    }

    #[test]
    fn empty_eps_list_is_invalid() {
        let err = validate("kind = \"diag_sweep\"\neps = []\n").unwrap_err();
        assert!(err.iter().any(|e| e.contains("eps")), "{err:?}");
    }
}
