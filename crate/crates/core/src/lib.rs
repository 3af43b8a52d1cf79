//! Identification of the stored energy function of a hyperelastic plate from
//! wave measurements.
//!
//! The pipeline: a theta-method Newton solver for the nonlinear elastic wave
//! equation on a trilinear hexahedral mesh, its linearization and backward
//! adjoint, a boundary sensor observation operator, and attenuated Landweber
//! iterations on B-spline dictionary coefficients.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod config;
pub mod error;
pub mod forward;
pub mod inversion;
pub mod io;
pub mod material;
pub mod mesh;
pub mod observation;
pub mod pipeline;
pub mod scenario;
pub mod sensitivity;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
