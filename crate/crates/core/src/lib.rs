//! Numerical and symbolic toolkit for U(1)-symmetric random unitary ensembles:
//! charge sectors, random ensembles, Weingarten calculus, chaos diagnostics
//! and decoupling analytics.

pub mod error;
pub mod hilbert;
pub mod rng;
pub mod ensembles;
pub mod weingarten;

pub use error::{Error, Result};
pub mod chaos;
pub mod decoupling;
