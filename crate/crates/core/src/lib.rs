//! Structural representations of nodes, pairs and triads estimated as Monte Carlo
//! averages of permutation-invariant functions over positional node-embedding
//! samples.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: attributed graphs, permutation actions, exact orbit oracles, presets.
//! - [`linalg`]: randomized subspace-iteration SVD and a dense Jacobi oracle.
//! - [`neural`]: dense nets, sum-pooling set encoders, Adam.
//! - [`samplers`]: equivariant embedding samplers (MC-SVD and the CGNN Gibbs sampler).
//! - [`structural`]: Monte Carlo structural estimates and supervised readouts.
//! - [`tasks`]: node, link and triad tasks with micro-F1.
//! - [`diagnostics`]: convergence curves and equivariance reports.
//! - [`experiment`]: config-driven end-to-end runs used by the CLI.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod neural;
pub mod samplers;
pub mod seeds;
pub mod structural;
pub mod tasks;

pub use error::{Error, Result, StageContext};
