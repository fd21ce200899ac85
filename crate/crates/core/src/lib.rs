//! Transform martingale estimating functions for Markov processes.
//!
//! A model supplies conditional transforms `E[g_t(Y_j) | Y_{j-1}]` for one or
//! more kernel families. From these the crate builds martingale differences,
//! optimally weights them into quasi-scores, measures their conditional
//! information, picks transform points that maximize it and solves the
//! resulting estimating equations.

pub mod error;
pub mod estfun;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod selection;
pub mod solver;

pub use error::{Error, Result};
pub use estfun::{efficiency, information_matrix, quasi_score, InfoMatrix, PointSet};
pub use kernels::{KernelFamily, KernelValue};
pub use models::{simulate, ProcessModel, SimSpec, TimeSeries};
pub use selection::{greedy_select, two_step_iterate, SelectionConfig};
pub use solver::{solve, SolveOptions, SolveReport};
