//! Adaptive-order feature interaction learning for CTR prediction.
//!
//! Features are embedded as phases of complex vectors; an Euler interaction
//! layer raises them to learnable real powers by mixing log-moduli and phases
//! linearly in polar form, fuses the result with a ReLU branch, and a linear
//! head turns the final complex representation into a click probability.
//!
//! Modules:
//!
//! - [`complex`]: rectangular/polar kernels and the power-product oracle
//! - [`tape`]: reverse-mode gradient tape over those kernels
//! - [`model`]: parameters, forward pass, archive format
//! - [`train`]: loss, metrics, Adam, gradient checking, training loop
//! - [`synthetic`]: planted-pattern data and order-recovery evaluation
//! - [`data`]: CSV ingestion, vocabularies, splits, batching
//! - [`cli`]: configuration, reports and the `eulernet` subcommands

pub mod cli;
pub mod complex;
pub mod data;
mod error;
pub mod model;
pub mod synthetic;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
