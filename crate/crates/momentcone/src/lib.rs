//! Simulation and moment analysis of random discrete measures.
//!
//! The crate simulates reference random-measure laws (gamma random
//! measures, marked-Poisson completely random measures, Poisson point
//! processes, fixed-atom measures, mixtures), computes their
//! diagonally-restricted moment measures either in closed form or by
//! Monte Carlo, and decides from moments alone whether the underlying law
//! is a random discrete measure or a simple point process. The decision
//! pipeline runs Hankel positive-definiteness tests, a Stieltjes
//! shifted-Hankel test, and a determinant-series criterion for an atom at
//! zero of the recovered weight marginal, and it can reconstruct the
//! correlation measure of the lifted marked point process.

pub mod cli;
pub mod combinatorics;
pub mod config;
pub mod correlation;
pub mod error;
pub mod measures;
pub mod models;
pub mod momentproblem;
pub mod moments;
pub mod special;

pub use cli::run_cli;
pub use error::{Error, Result};
