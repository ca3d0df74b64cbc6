//! Decentralized primal-dual training of generalized linear models.
//!
//! Nodes of a gossip network each own a block of columns of the data matrix
//! `A` and the matching coordinates of the model `x`. Every round a node mixes
//! its estimate `v_k` of the shared vector `Ax` with its neighbours, solves a
//! quadratic subproblem over its own coordinates, and folds the update back
//! into `v_k`. The average of the estimates tracks `Ax` exactly, so the
//! decentralized objective and its duality gap can be monitored without any
//! central coordinator.
//!
//! Modules, bottom up:
//! - [`data`]: sparse column storage, LIBSVM ingestion, synthetic data,
//!   partitioning and the spectral constants of each block.
//! - [`problem`]: the smooth part `f`, the separable part `g`, their
//!   conjugates and proximal maps.
//! - [`topology`]: graphs, Metropolis-Hastings mixing matrices, `beta`, and
//!   time-varying gossip schedules.
//! - [`local_solver`]: randomized coordinate descent on the local subproblem.
//! - [`engine`]: the round loop, elasticity and fault tolerance.
//! - [`certificates`]: decentralized duality gap and local certificates.
//! - [`baselines`]: gradient tracking (DIGing) for smooth objectives.
//! - [`harness`]: configuration, reference optima, trace files and the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod certificates;
pub mod data;
pub mod engine;
mod error;
pub mod harness;
pub mod linalg;
pub mod local_solver;
pub mod problem;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
