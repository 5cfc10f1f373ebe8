//! solitonlab: a numerical laboratory for gKdV and NLS multi-solitons.
//!
//! The crate builds solitons and multi-solitons (exactly for KdV via the
//! tau-determinant formula, as superpositions otherwise), evolves them with
//! pseudospectral solvers, and measures the decay machinery that controls
//! them: weight-function certificates, weighted functionals, the
//! antiderivative ladder, and region-wise pointwise decay rates.
//!
//! Modules:
//! - [`profiles`]: ground states Q, traveling waves, H^s norms, the
//!   derivative induction checker.
//! - [`integrable`]: the exact KdV N-soliton oracle with overflow-safe,
//!   cancellation-free evaluation of the solution, its derivatives, and
//!   the residual against the asymptotic soliton train.
//! - [`weights`]: the two arctan weight families, property certificates,
//!   the ladder phi_[n], the superpolynomial series weight.
//! - [`solver`]: ETDRK4 / IFRK4 for gKdV, Strang splitting for NLS,
//!   conservation tracking.
//! - [`diagnostics`]: theta, kappa_{alpha,beta}, the I/J/F_s functionals,
//!   moment integrals, decay-rate fits, interaction integrals.
//! - [`scenario`]: JSON-config scenario runner emitting snapshots, CSV
//!   tables and report.json.
//!
//! Every capability has a runnable example under `examples/`; start with
//! `two_soliton_oracle` and `decay_rates`.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrable;
pub mod io;
pub mod jet;
pub mod profiles;
pub mod scenario;
pub mod solver;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{make_grid, ComplexField, Grid1D, RealField};
