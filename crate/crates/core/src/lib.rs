//! Simulation and optimization of quantum state transfer between two cascaded
//! optical cavities driven by classical control pulses.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: the five-dimensional single-excitation space, its operators
//!   and the pure-state / density-matrix conversions.
//! - [`pulses`]: analytic, constructed and sampled coupling pulses `g₁(t)`,
//!   `g₂(t)` plus the perturbation profiles used to model pulse noise.
//! - [`dynamics`]: the shared adaptive integrator, the zero-jump trajectory,
//!   the cascaded master equation and its first-order noise correction.
//! - [`sensitivity`]: noise sensitivities `η_j` and pulse comparison tables.
//! - [`optimizer`]: numerical-substitution pulse optimization, end-time
//!   sweeps and the hyperbolic extrapolation fit.
//! - [`io`]: CSV/plain-text emitters and readers shared by the CLI.
//!
//! All quantities are expressed in units where `ħ = κ = 1`: times in `1/κ`,
//! couplings in `κ`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod optimizer;
pub mod pulses;
pub mod sensitivity;

pub use error::{Error, Result};
