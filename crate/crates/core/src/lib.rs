//! Numerical laboratory for log-correlated Gaussian fields: cut-off
//! covariance kernels, multiscale samplers, multiplicative chaos, thick
//! point spectra and audits of the sufficient conditions behind them.

pub mod conditions;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod fields;
pub mod fractal;
pub mod gmc;
pub mod kernels;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorCategory, Result};
