//! Independent oracles shared by the integration tests. Nothing here calls
//! the code under test except to build inputs.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spca::matrix::thin_svd;
use spca::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::new(gaussian(rng, rows, cols)).unwrap()
}

/// Orthonormal `p x k` matrix from Gram-Schmidt on Gaussian columns.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, p: usize, k: usize) -> Array2<f64> {
    let g = gaussian(rng, p, k);
    let mut q = Array2::<f64>::zeros((p, k));
    for j in 0..k {
        let mut v = g.column(j).to_owned();
        // two passes keep the columns orthogonal to working precision
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let d = qi.dot(&v);
                v.scaled_add(-d, &qi);
            }
        }
        let n = v.dot(&v).sqrt();
        q.column_mut(j).assign(&(v / n));
    }
    q
}

/// Matrix of exact rank `r` with a prescribed geometric spectrum.
pub fn exact_rank(rng: &mut ChaCha8Rng, n: usize, p: usize, r: usize) -> DenseMatrix {
    let u = random_orthonormal(rng, n, r);
    let v = random_orthonormal(rng, p, r);
    let s = Array2::from_diag(&ndarray::Array1::from_iter(
        (0..r).map(|i| 10.0 * 0.8f64.powi(i as i32)),
    ));
    DenseMatrix::new(u.dot(&s).dot(&v.t())).unwrap()
}

/// `1/2 ||X - X B A^T||_F^2` evaluated from scratch.
pub fn misfit(x: &Array2<f64>, b: &Array2<f64>, a: &Array2<f64>) -> f64 {
    let r = x - &x.dot(b).dot(&a.t());
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// `sum_{j > k} sigma_j^2`.
pub fn tail_energy(x: &DenseMatrix, k: usize) -> f64 {
    thin_svd(x)
        .unwrap()
        .sigma
        .iter()
        .skip(k)
        .map(|s| s * s)
        .sum()
}

/// Minimizer of `f` over the grid `lo, lo + step, ..., hi`; ties keep the first.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let z = lo + i as f64 * step;
        let v = f(z);
        if v < best.1 {
            best = (z, v);
        }
    }
    best
}

/// Two-level grid search over a square: coarse pass, then a fine pass
/// around the coarse winner.
pub fn grid_argmin_2d(
    f: impl Fn(f64, f64) -> f64,
    center: (f64, f64),
    radius: f64,
    coarse: f64,
    fine: f64,
) -> ((f64, f64), f64) {
    let mut best = (center, f(center.0, center.1));
    let scan = |c: (f64, f64), r: f64, h: f64, best: &mut ((f64, f64), f64)| {
        let n = (2.0 * r / h).round() as i64;
        for i in 0..=n {
            for j in 0..=n {
                let z = (c.0 - r + i as f64 * h, c.1 - r + j as f64 * h);
                let v = f(z.0, z.1);
                if v < best.1 {
                    *best = (z, v);
                }
            }
        }
    };
    scan(center, radius, coarse, &mut best);
    let c = best.0;
    scan(c, 2.0 * coarse, fine, &mut best);
    best
}

/// Central finite differences of a scalar function of a matrix.
pub fn central_differences(
    f: impl Fn(&Array2<f64>) -> f64,
    at: &Array2<f64>,
    h: f64,
) -> Array2<f64> {
    let mut g = Array2::<f64>::zeros(at.raw_dim());
    let mut probe = at.clone();
    for idx in ndarray::indices(at.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(&probe);
        probe[idx] = orig - h;
        let down = f(&probe);
        probe[idx] = orig;
        g[idx] = (up - down) / (2.0 * h);
    }
    g
}

pub fn fro(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Scalar penalty written out from its definition.
pub fn psi_scalar(kind: spca::RegularizerKind, alpha: f64, beta: f64, z: f64) -> f64 {
    use spca::RegularizerKind::*;
    let nz = if z != 0.0 { 1.0 } else { 0.0 };
    match kind {
        None => 0.0,
        L0 => alpha * nz,
        L1 => alpha * z.abs(),
        L0Ridge => alpha * nz + beta * z * z,
        L1Ridge => alpha * z.abs() + beta * z * z,
        GroupLasso => alpha * z.abs(),
    }
}

/// `psi(z) + (z - x)^2 / (2 gamma)` for a scalar penalty.
pub fn prox_objective(
    kind: spca::RegularizerKind,
    alpha: f64,
    beta: f64,
    gamma: f64,
    x: f64,
    z: f64,
) -> f64 {
    psi_scalar(kind, alpha, beta, z) + (z - x).powi(2) / (2.0 * gamma)
}

/// Grid minimizer of the scalar prox objective. The grid contains 0 exactly
/// so the nonsmooth point of every penalty is a candidate.
pub fn prox_grid_oracle(
    kind: spca::RegularizerKind,
    alpha: f64,
    beta: f64,
    gamma: f64,
    x: f64,
    step: f64,
) -> (f64, f64) {
    let m = ((x.abs() + 1.0) / step).ceil() as i64;
    let mut best = (0.0, prox_objective(kind, alpha, beta, gamma, x, 0.0));
    for i in -m..=m {
        let z = i as f64 * step;
        let v = prox_objective(kind, alpha, beta, gamma, x, z);
        if v < best.1 {
            best = (z, v);
        }
    }
    best
}
