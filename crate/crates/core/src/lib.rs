//! Nonlinear opto-vibronics of a two-level molecule with linear and quadratic
//! electron-vibron coupling.
//!
//! Two independent routes are provided for every spectroscopic quantity:
//! closed-form expressions ([`franck_condon`], [`analytic`], [`cavity`]) and
//! brute-force density-matrix simulation in a truncated Fock space
//! ([`fock`], [`lindblad`]). The [`ladder`] module holds the per-sublevel
//! rate-equation hierarchy used to check the reduced rate equation.
//!
//! Basis conventions: electronic index 0 is `|g>` and 1 is `|e>`; in tensor
//! products the photon factor (if any) comes first, then the electronic
//! factor, then the vibration. Density matrices are vectorized by column
//! stacking.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cavity;
pub mod error;
pub mod fock;
pub mod franck_condon;
pub mod ladder;
pub mod lindblad;
pub mod model;
pub mod numerics;
pub mod spectrum;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, C64};

/// Crate version, recorded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
