#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
//! Calibrations of the axial hyperplane inside round cones `{t > λ|x|}`.

pub mod calibration;
pub mod cone;
pub mod error;
pub mod exterior;
pub mod lab;
pub mod parallel;
pub mod verifier;

pub use error::{Error, Result};
