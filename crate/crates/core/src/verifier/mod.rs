//! Sampling checks, difference studies and flux quadrature for the
//! calibration field, with machine-readable reports.

mod checks;
mod flux;
mod identities;
mod report;
mod sampling;
mod suite;

pub use checks::*;
pub use flux::*;
pub use identities::*;
pub use report::*;
pub use sampling::*;
pub use suite::*;
