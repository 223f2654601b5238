//! Weighted shifts on directed trees.
//!
//! The shift `S e_u = Σ_{v ∈ Chi(u)} λ_v e_v` is applied matrix-free on
//! finite or procedurally generated trees. On top of it the crate computes
//! the asymptotic limits of a contraction and of its adjoint, the isometric
//! asymptotes, constructive cyclic vectors for backward shifts, and the
//! similarity witnesses for trees with a single branching vertex. Every
//! construction can be checked against dense truncations on a finite window.

pub mod asymptote;
pub mod asymptotics;
pub mod cyclicity;
pub mod error;
pub mod linalg;
pub mod shift;
pub mod similarity;
mod special;
pub mod tree;

pub use error::{Error, Result};
