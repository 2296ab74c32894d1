//! Simulation and numerics for k-nearest-neighbour graphs on planar Poisson
//! point processes.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criticalbound;
pub mod error;
pub mod graphmetrics;
pub mod harness;
pub mod nngraph;
pub mod pointproc;
pub mod rng;
pub mod stats;
pub mod tiles;

pub use error::{Error, Result};
