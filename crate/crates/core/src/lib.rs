//! Numerical workbench for one-dimensional stationary wave mechanics.
//!
//! Units are chosen so that the single-channel equation reads
//! `-psi'' = (E - V(x)) psi`.

pub mod bands;
pub mod bsec;
pub mod channels;
pub mod cli;
pub mod cxperiodic;
pub mod error;
pub mod model;
pub mod propagate;
mod roots;

pub use error::{Error, Result};

/// Fixed float formatting used by every text output: 17 significant digits
/// in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
