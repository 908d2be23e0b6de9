//! Variational inequalities solved as proximal fixed points with a
//! boundary-conforming neural surrogate.

pub mod benchmarks;
pub mod cli;
pub mod diff_engine;
pub mod error;
pub mod network;
pub mod optimizer;
pub mod problem;
pub mod prox;
pub mod trainer;

pub use error::{EviError, Result};
