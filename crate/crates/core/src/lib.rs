//! Cramér-Rao bounds and attacker-side estimators for breathing-rate
//! sensing from quantized received signal strength.

pub mod cli;
pub mod crb;
pub mod dsp;
pub mod error;
pub mod experiments;
pub mod io;
pub mod rng;
pub mod selftest;
pub mod signal;
pub mod special;

pub use error::{Error, Result};
