//! Weak-measurement phase amplification in polarization interferometry.
//!
//! - [`jones`]: Jones vectors, optical elements and projective detection.
//! - [`apparatus`]: the post-selected Sagnac amplifier and the standard
//!   weak-value scheme, with their closed-form predictions.
//! - [`metrology`]: phase-uncertainty budgets for single-qubit, N00N and
//!   weak-measurement estimation, with a Monte Carlo cross-check.
//! - [`fitting`]: linear least-squares fringe fitting and phase differencing.
//! - [`cli`]: the `phase-amp` command line (tables, JSON reports, SVG plots).

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apparatus;
pub mod cli;
pub mod error;
pub mod fitting;
pub mod jones;
pub mod metrology;
pub mod plot;
mod rng;
pub mod table;

pub use error::{Error, Result};
