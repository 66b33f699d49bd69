//! Degenerate approximation of periodic covariance kernels and numerical
//! continuity diagnostics for the associated Gaussian processes.

pub mod blocks;
pub mod degenerate;
pub mod diag;
pub mod error;
pub mod experiments;
pub mod franklin;
pub mod grid;
pub mod kernel;
pub mod lacunar;
pub mod lacunar_sup;
pub mod mercer;
pub mod modulus;
pub mod paths;
pub mod rng;
pub mod trig;

pub use error::{Error, Result};
