//! Bayesian estimation of the three-parameter normal-ogive item response
//! model with a finite normal-mixture ability distribution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod io;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod simulation;

pub use error::{Block, Error, Result};
pub use rng::RngStream;
