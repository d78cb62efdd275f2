//! Two-point flux finite volume solver for multispecies biofilm growth with
//! cross-diffusion and a degenerate-singular biomass nonlinearity.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod quadrature;
pub mod scheme;
pub mod selftest;

pub use error::{Error, Result};
