//! Dense linear-algebra substrate.
//!
//! [`DenseMatrix`] is a validated wrapper around an `ndarray::Array2<f64>`: at
//! least one row and column, every entry finite. The canonical serialized
//! storage order is column-major (see [`DenseMatrix::to_column_major`]); the
//! in-memory layout is whatever ndarray chose and is never observable through
//! the public API.
//!
//! Factorizations are backed by LAPACK through `ndarray-linalg`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{JobSvd, QR, SVDDC};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};

/// Default relative tolerance for [`spectral_norm_sq`].
pub const POWER_TOL: f64 = 1e-6;
/// Default iteration cap for [`spectral_norm_sq`].
pub const POWER_MAX_ITER: usize = 500;
const POWER_SEED: u64 = 0x005e_ed0f_9a11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DenseMatrix {
    data: Array2<f64>,
}

impl DenseMatrix {
    /// Wraps an array, rejecting empty shapes and non-finite entries.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(SpcaError::InvalidMatrix(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if let Some(((i, j), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SpcaError::InvalidMatrix(format!(
                "non-finite entry {v} at ({i}, {j})"
            )));
        }
        Ok(Self { data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(Array2::zeros((rows, cols)))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(Array2::eye(n))
    }

    /// Builds a matrix from row-major nested rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(SpcaError::Shape(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((nrows, ncols), flat)
            .map_err(|e| SpcaError::Shape(e.to_string()))?;
        Self::new(data)
    }

    /// Builds a matrix from entries stored column by column.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SpcaError::Shape(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let arr = Array2::from_shape_vec((cols, rows), data)
            .map_err(|e| SpcaError::Shape(e.to_string()))?
            .reversed_axes();
        Self::new(arr.as_standard_layout().into_owned())
    }

    /// Entries in column-major order: `(0,0), (1,0), ..., (rows-1,0), (0,1), ...`.
    pub fn to_column_major(&self) -> Vec<f64> {
        self.data.t().iter().copied().collect()
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[[row, col]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_sq(self.data.view()).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix {
            data: self.data.t().as_standard_layout().into_owned(),
        }
    }

    pub fn column_means(&self) -> Array1<f64> {
        self.data
            .mean_axis(Axis(0))
            .expect("matrix has at least one row")
    }

    /// Subtracts each column's mean, giving columns with zero empirical mean.
    pub fn centered(&self) -> DenseMatrix {
        let means = self.column_means();
        DenseMatrix {
            data: &self.data - &means.insert_axis(Axis(0)),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    /// column-major
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = SpcaError;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::from_column_major(raw.rows, raw.cols, raw.data)
    }
}

impl From<DenseMatrix> for RawMatrix {
    fn from(m: DenseMatrix) -> Self {
        RawMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data: m.to_column_major(),
        }
    }
}

/// Thin singular value decomposition `m = u * diag(sigma) * v^T` with
/// `r = min(rows, cols)` singular triplets in nonincreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Array2<f64>,
    pub sigma: Array1<f64>,
    pub v: Array2<f64>,
}

impl ThinSvd {
    pub fn rank_tol(&self, rel_tol: f64) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > rel_tol * top).count()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let us = &self.u * &self.sigma.view().insert_axis(Axis(0));
        us.dot(&self.v.t())
    }
}

pub fn thin_svd(m: &DenseMatrix) -> Result<ThinSvd> {
    svd_view(m.view())
}

pub(crate) fn svd_view(m: ArrayView2<'_, f64>) -> Result<ThinSvd> {
    let (rows, cols) = m.dim();
    let failed = |_| SpcaError::Convergence {
        routine: "thin SVD",
        rows,
        cols,
    };
    let (u, sigma, vt) = m.svddc(JobSvd::Some).map_err(failed)?;
    let (u, vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => {
            return Err(SpcaError::Convergence {
                routine: "thin SVD",
                rows,
                cols,
            })
        }
    };
    Ok(ThinSvd {
        u,
        sigma,
        v: vt.reversed_axes().as_standard_layout().into_owned(),
    })
}

/// Orthonormal basis from a Householder QR factorization, with a rank report.
#[derive(Debug, Clone)]
pub struct QrBasis {
    pub q: DenseMatrix,
    /// Number of diagonal entries of R above `max|R_ii| * max(rows, cols) * eps`.
    pub numerical_rank: usize,
}

impl QrBasis {
    pub fn rank_deficient(&self) -> bool {
        self.numerical_rank < self.q.cols()
    }
}

/// Householder QR of a tall matrix; `Q` keeps orthonormal columns even when
/// the input is rank deficient.
pub fn qr_orthonormal(m: &DenseMatrix) -> Result<QrBasis> {
    let (q, r) = qr_view(m.view())?;
    let diag: Vec<f64> = r.diag().iter().map(|v| v.abs()).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    let cutoff = top * (m.rows().max(m.cols()) as f64) * f64::EPSILON;
    let numerical_rank = diag.iter().filter(|&&d| d > cutoff).count();
    Ok(QrBasis {
        q: DenseMatrix::new(q)?,
        numerical_rank,
    })
}

pub(crate) fn orthonormalize(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    qr_view(m).map(|(q, _)| q)
}

fn qr_view(m: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (rows, cols) = m.dim();
    if rows < cols {
        return Err(SpcaError::Shape(format!(
            "QR basis needs rows >= cols, got {rows}x{cols}"
        )));
    }
    m.qr().map_err(|_| SpcaError::Convergence {
        routine: "QR",
        rows,
        cols,
    })
}

/// Estimate of `||m||_2^2` from power iteration on `m^T m`.
///
/// The Rayleigh quotient never overestimates the top eigenvalue. Iteration
/// stops once the eigen-residual relative to the estimate drops below `tol`
/// or after `max_iter` sweeps.
pub fn spectral_norm_sq(m: &DenseMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    spectral_norm_sq_view(m.view(), tol, max_iter)
}

pub(crate) fn spectral_norm_sq_view(
    m: ArrayView2<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if m.iter().all(|&v| v == 0.0) {
        return Err(SpcaError::ZeroMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Array1<f64> = (0..m.ncols())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    normalize(&mut v);

    let mut estimate = 0.0;
    for _ in 0..max_iter.max(1) {
        let w = m.dot(&v);
        let z = m.t().dot(&w);
        let theta = w.dot(&w);
        let residual = (&z - &(theta * &v)).dot(&(&z - &(theta * &v))).sqrt();
        estimate = theta;
        let znorm = z.dot(&z).sqrt();
        if znorm == 0.0 {
            // start vector in the null space; restart along a coordinate with mass
            let j = column_with_max_norm(m);
            v.fill(0.0);
            v[j] = 1.0;
            continue;
        }
        v = z / znorm;
        if residual <= tol * theta {
            break;
        }
    }
    if !estimate.is_finite() {
        return Err(SpcaError::Convergence {
            routine: "power iteration",
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    // one more Rayleigh quotient at the final vector
    let w = m.dot(&v);
    Ok(estimate.max(w.dot(&w)))
}

fn column_with_max_norm(m: ArrayView2<'_, f64>) -> usize {
    m.axis_iter(Axis(1))
        .map(|c| c.dot(&c))
        .enumerate()
        .fold(
            (0, -1.0),
            |best, (j, n)| if n > best.1 { (j, n) } else { best },
        )
        .0
}

fn normalize(v: &mut Array1<f64>) {
    let n = v.dot(v).sqrt();
    if n > 0.0 {
        v.mapv_inplace(|x| x / n);
    }
}

pub fn frobenius_sq(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub(crate) fn l1_norm(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

pub(crate) fn vector_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Sine of the largest principal angle between the column spaces of `a` and `b`.
///
/// Both inputs are orthonormalized first; the result is the spectral norm of
/// `(I - Qa Qa^T) Qb`, which stays accurate for tiny angles.
pub fn max_principal_angle_sin(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(SpcaError::Shape(format!(
            "subspaces live in different dimensions: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let qa = orthonormalize(a)?;
    let qb = orthonormalize(b)?;
    let resid = &qb - &qa.dot(&qa.t().dot(&qb));
    let svd = svd_view(resid.view())?;
    Ok(svd.sigma.iter().copied().fold(0.0, f64::max).min(1.0))
}

/// `||a^T a - I||_F`
pub fn orthonormality_defect(a: ArrayView2<'_, f64>) -> f64 {
    let gram = a.t().dot(&a);
    let k = gram.nrows();
    frobenius_sq((gram - Array2::<f64>::eye(k)).view()).sqrt()
}
