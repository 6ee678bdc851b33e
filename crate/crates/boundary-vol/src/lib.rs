//! Volatility estimation for a semimartingale observed through one-sided
//! errors.
//!
//! The library simulates boundary paths and the two observation models
//! (Poisson point process above the path and one-sided regression noise),
//! calibrates the moment function mapping squared volatility to the expected
//! squared difference of adjacent bin minima, inverts it blockwise into a
//! rate-optimal integrated-volatility estimator with jump-robust truncation,
//! and validates the Monte Carlo machinery against a closed-form
//! Airy/Scorer Laplace-transform oracle.

pub mod airy;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod excursion;
pub mod interp;
pub mod observe;
pub mod path;
pub mod psi;
pub mod quotes;
pub mod rng;
pub mod stats;
pub mod study;

pub use error::{Error, Result};
