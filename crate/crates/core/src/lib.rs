//! Sparse principal component analysis via variable projection.
//!
//! The problem is
//!
//! ```text
//! min_{A, B}  1/2 ||X - X B A^T||_F^2 + psi(B)   subject to A^T A = I
//! ```
//!
//! where `B` holds sparse loadings and `A` is orthonormal. `A` is eliminated
//! in closed form by an orthogonal Procrustes step, and `B` is updated by
//! proximal gradient steps on the resulting value function.
//!
//! * [`solver::solve`]: deterministic solver.
//! * [`sketch::solve_randomized`]: the same solver on a randomized sketch `Q^T X`.
//! * [`robust::solve_robust`]: Huber-loss variant with an explicit sparse outlier matrix.
//!
//! Supporting modules provide the proximal operators ([`prox`]), the
//! Procrustes update ([`procrustes`]), synthetic data ([`datagen`]), file I/O
//! ([`io`]) and a timing harness ([`bench`]).

pub mod bench;
pub mod datagen;
pub mod error;
pub mod io;
pub mod matrix;
pub mod procrustes;
pub mod prox;
pub mod robust;
pub mod sketch;
pub mod solver;

pub use error::{Result, SpcaError};
pub use matrix::{DenseMatrix, ThinSvd};
pub use procrustes::OrthonormalFactor;
pub use prox::{RegularizerKind, RegularizerSpec};
pub use solver::{SolverConfig, SpcaResult, Termination, VarianceReport};
