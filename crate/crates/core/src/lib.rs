//! Solvers and certifiers for the one-dimensional isentropic Carrollian
//! fluid equations.
//!
//! ```text
//! ∂ₜ(σβ) + ∂ₓσ = 0,
//! ∂ₜ(σ^γ/γ + σβ²) + ∂ₓ(σβ) = 0,        1 < γ ≤ 3.
//! ```
//!
//! The crate is organised around the Riemann invariants `w₁ = β + σ^θ/θ`,
//! `w₂ = β − σ^θ/θ` with `θ = (γ − 1)/2`:
//!
//! - [`state`]: eigenstructure, invariant maps and duality diagnostics.
//! - [`initial_data`]: presets and tabulated C¹ profiles.
//! - [`classify`]: compression classes, invariant-region gate and runtime certificates.
//! - [`gamma3`]: exact solution and blow-up time for `γ = 3`.
//! - [`characteristics`]: characteristic bundles, Riccati blow-up detection and
//!   blow-up time bounds for `γ ∈ (1, 3)`.
//! - [`reference`]: first-order upwind grid solver used for cross-validation.
//! - [`run`]: run configuration, reports and snapshot persistence for the CLI.

// `!(x > 0.0)` is used throughout so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod classify;
pub mod error;
pub mod gamma3;
pub mod initial_data;
pub mod reference;
pub mod run;
pub mod state;

pub use error::{CarrollError, Result};
pub use initial_data::{InitialData, PresetSpec};
pub use state::{Family, FluidState, GammaParams, RiemannState};
