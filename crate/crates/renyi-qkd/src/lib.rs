//! Certified finite-size key rates for prepare-and-measure QKD from a
//! Renyi-entropy objective.
//!
//! The crate minimizes Tr(G(rho)) * D_beta(G(rho) || Z(G(rho))) over the
//! constraint set compatible with observed statistics, certifies a lower
//! bound on the minimum through an SDP dual, and assembles the finite-size
//! key length for a chosen (or optimized) Renyi order.

pub mod cli;
pub mod config;
pub mod error;
pub mod finitesize;
mod linalg;
pub mod matfun;
pub mod objective;
pub mod optimizer;
pub mod protocol;
pub mod types;

pub use error::{Error, Result};
