//! Randomized range finder and the sketched solver.
//!
//! `Y = X Omega` with a Gaussian test matrix, optionally refined by subspace
//! (power) iterations, gives an orthonormal basis `Q` for the dominant range
//! of `X`. The solver then works on the `l x p` sketch `Q^T X`, which has the
//! same column space of loadings as `X`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::matrix::{orthonormalize, DenseMatrix};
use crate::solver::{solve, SolverConfig, SpcaResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub target_rank: usize,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl SketchConfig {
    pub fn new(target_rank: usize, seed: u64) -> Self {
        Self {
            target_rank,
            oversample: 10,
            power_iters: 2,
            seed,
        }
    }

    pub fn from_solver(config: &SolverConfig) -> Self {
        Self {
            target_rank: config.rank,
            oversample: config.oversample,
            power_iters: config.power_iters,
            seed: config.seed,
        }
    }

    /// Sketch dimension `l = k + oversample`.
    pub fn sketch_dim(&self) -> usize {
        self.target_rank + self.oversample
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let l = self.sketch_dim();
        if self.target_rank == 0 {
            return Err(SpcaError::Config(
                "sketch target rank must be positive".into(),
            ));
        }
        if l > rows.min(cols) {
            return Err(SpcaError::Config(format!(
                "sketch dimension {l} = {} + {} exceeds min({rows}, {cols})",
                self.target_rank, self.oversample
            )));
        }
        Ok(())
    }
}

/// Orthonormal range basis `Q` (n x l) together with the sketch `Q^T X` (l x p).
#[derive(Debug, Clone)]
pub struct RandomizedRange {
    pub q: DenseMatrix,
    pub sketch: DenseMatrix,
}

pub fn randomized_range(x: &DenseMatrix, cfg: &SketchConfig) -> Result<RandomizedRange> {
    cfg.validate(x.rows(), x.cols())?;
    let xv = x.view();
    let l = cfg.sketch_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let omega = Array2::from_shape_simple_fn((x.cols(), l), || StandardNormal.sample(&mut rng));

    let mut q = orthonormalize(xv.dot(&omega).view())?;
    for _ in 0..cfg.power_iters {
        let w = orthonormalize(xv.t().dot(&q).view())?;
        q = orthonormalize(xv.dot(&w).view())?;
    }
    let sketch = q.t().dot(&xv);
    Ok(RandomizedRange {
        q: DenseMatrix::new(q)?,
        sketch: DenseMatrix::new(sketch)?,
    })
}

/// The compressed matrix `Q^T X`.
pub fn randomized_sketch(x: &DenseMatrix, cfg: &SketchConfig) -> Result<DenseMatrix> {
    randomized_range(x, cfg).map(|r| r.sketch)
}

/// Solves on the sketch of `x`. Loadings live in the original variable space;
/// the objective traces are measured on the sketch.
pub fn solve_randomized(x: &DenseMatrix, config: &SolverConfig) -> Result<SpcaResult> {
    if !config.randomized {
        return Err(SpcaError::Config(
            "solve_randomized requires a randomized configuration".into(),
        ));
    }
    config.validate(x.rows(), x.cols())?;
    if x.is_zero() {
        return Err(SpcaError::ZeroMatrix);
    }
    let sketch = randomized_sketch(x, &SketchConfig::from_solver(config))?;
    solve(&sketch, config)
}
