//! Nonlinear collapse dynamics for bipartite pure states.
//!
//! A two-particle pure state is held as its n x n coefficient matrix C with
//! Tr(C'C) = 1. The library implements the determinant-based state algebra
//! (hat map, Schmidt analysis, entanglement classification), the nonlinear
//! measurement flow it generates together with the stochastic
//! double-or-nothing collapse game, the competition of that flow against a
//! linear exchange coupling, a neutral-kaon estimate of the induced
//! CP-violating phase, and the n-dimensional subspace-filter
//! generalization with its quadrature and hypergeometric termination
//! times.
//!
//! Everything is deterministic given a master seed: stochastic ensembles
//! derive one counter-based rng stream per trajectory, so results are
//! identical at any thread count.

#![forbid(unsafe_code)]

pub mod collapse_dynamics;
pub mod competition;
pub mod error;
pub mod highdim;
pub mod hyp;
pub mod kaon;
pub mod matrix;
pub mod quadrature;
pub mod sample;
pub mod state_algebra;
mod svd;

pub use error::{Error, Result};
pub use matrix::CMatrix;
pub use state_algebra::BipartiteState;
