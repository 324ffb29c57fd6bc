//! Learning nonlinear operators with branch-trunk networks.
//!
//! The crate covers the whole pipeline: input-function samplers (Gaussian
//! random fields and Chebyshev series), reference solvers for the ODE and
//! diffusion-reaction problems, triplet datasets, stacked and unstacked
//! operator networks with an FNN baseline, and a training/experiment harness
//! with convergence-rate fitting.

pub mod error;
pub mod nn;

pub use error::{Error, Result};
pub mod rng;
pub mod spaces;
pub mod solvers;
pub mod dataset;
pub mod deeponet;
pub mod experiments;

mod binio;
