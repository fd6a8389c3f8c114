//! Numerical laboratory for entropic optimal transport with an
//! Ornstein-Uhlenbeck reference process.
//!
//! The crate discretizes the Gaussian on a tensor grid, builds the OU
//! transition kernel on it, and solves the Schrodinger system by the clamped
//! Fortet fixed-point iteration and by log-domain Sinkhorn. Around those
//! solvers sit discrete convexity tests, convex-order oracles (1D call
//! functions and an LP feasibility check), one-dimensional quadratic transport
//! and a command-line driver that writes reproducible CSV outputs.

pub mod cli;
pub mod convex_order;
pub mod convexity;
pub mod error;
pub mod kernel;
pub mod lp;
pub mod measures;
pub mod numeric;
pub mod schrodinger;
pub mod transport;

pub use error::{Error, Result};
