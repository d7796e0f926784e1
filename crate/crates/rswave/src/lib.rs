//! Desk-scale numerical laboratory for linear rotating shallow-water waves in
//! the semiclassical regime.
//!
//! The crate implements the full chain from phase-space symbol calculus to
//! direct PDE evolution:
//!
//! - [`symbol`]: the 3×3 propagator symbol, its Poincaré/Rossby branch
//!   eigenstructure in closed form, and the Rossby Hamiltonian.
//! - [`moyal`]: first-order Moyal calculus on matrix symbols and the
//!   symbol-level first diagonal correction `D₁`.
//! - [`weyl`]: discrete Weyl quantization on a periodic grid, dense and
//!   matrix-free, with adjointness checks and a symbol round-trip.
//! - [`diag`]: the operator-level intertwiner, block-diagonalization residual
//!   scaling, and branch projectors.
//! - [`ray`]: symplectic bicharacteristic tracing with trapping/escape
//!   diagnostics.
//! - [`mourre`]: commutator positivity on spectral windows and the
//!   propagation-decay estimate.
//! - [`pde`]: the linear evolution itself, wave-packet initial data, branch
//!   splitting, and region-mass diagnostics.
//! - [`experiment`]: reproducible experiment drivers emitting CSV/JSON.
//!
//! Everything is deterministic given a configuration and a root seed; see
//! [`rng`] for the counter-based stream derivation.

pub mod algebra;
pub mod config;
pub mod coriolis;
pub mod diag;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod grid;
pub mod io;
pub mod mourre;
pub mod moyal;
pub mod packet;
pub mod pde;
pub mod phase;
pub mod ray;
pub mod rng;
pub mod spectral;
pub mod symbol;
pub mod weyl;

pub use error::{Error, Result};
pub use phase::PhasePoint;

/// Default floor for the branch-gap condition `ξ² + b²(x₂) ≥ gap_floor`.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-6;
