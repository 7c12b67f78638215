//! Numerical solution of impulse control problems for piecewise deterministic
//! Markov processes by quantization of the embedded chain.

pub mod bounds;
pub mod config;
pub mod error;
pub mod model;
pub mod operators;
pub mod oracle;
pub mod pipeline;
pub mod quadrature;
pub mod quantizer;
pub mod solver;

pub use error::{Error, Result};
