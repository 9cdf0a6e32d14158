//! Finite-dimensional quantum thermodynamics: ergotropy and free energy,
//! distance-based monotones built from nonequilibrium temperatures, and
//! statistical certification of free operations for the completely-passive
//! and passive resource theories.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod channels;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod repro;
pub mod spectra;
pub mod workfn;

pub use error::{Error, Result};
