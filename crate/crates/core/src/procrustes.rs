//! Orthogonal Procrustes: the partial minimizer over the orthonormal factor.

use ndarray::{Array2, ArrayView2};

use crate::error::{Result, SpcaError};
use crate::matrix::{orthonormality_defect, svd_view, DenseMatrix};

/// A `p x k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFactor {
    a: Array2<f64>,
}

impl OrthonormalFactor {
    /// Wraps `a` after checking `||a^T a - I||_F <= tol`.
    pub fn new(a: Array2<f64>, tol: f64) -> Result<Self> {
        let defect = orthonormality_defect(a.view());
        if defect > tol {
            return Err(SpcaError::InvalidMatrix(format!(
                "columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { a })
    }

    pub(crate) fn from_trusted(a: Array2<f64>) -> Self {
        Self { a }
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn into_array(self) -> Array2<f64> {
        self.a
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        DenseMatrix::new(self.a.clone())
    }

    pub(crate) fn flip_column(&mut self, j: usize) {
        self.a.column_mut(j).mapv_inplace(|v| -v);
    }
}

/// Polar factor `U V^T` of `m = U S V^T`: the maximizer of `trace(m^T A)` over
/// matrices with orthonormal columns.
///
/// When `m` is rank deficient the maximizer is not unique and the SVD's own
/// completion of the null directions is used.
pub fn polar_factor(m: &DenseMatrix) -> Result<OrthonormalFactor> {
    polar_view(m.view())
}

pub(crate) fn polar_view(m: ArrayView2<'_, f64>) -> Result<OrthonormalFactor> {
    let (p, k) = m.dim();
    if p < k {
        return Err(SpcaError::Shape(format!(
            "polar factor needs at least as many rows as columns, got {p}x{k}"
        )));
    }
    let svd = svd_view(m)?;
    Ok(OrthonormalFactor::from_trusted(svd.u.dot(&svd.v.t())))
}

/// `A(B) = polar(X^T X B)`, or `polar((X - S)^T X B)` when outliers are given.
pub fn procrustes_update(
    x: &DenseMatrix,
    b: &DenseMatrix,
    s: Option<&DenseMatrix>,
) -> Result<OrthonormalFactor> {
    if x.cols() != b.rows() {
        return Err(SpcaError::Shape(format!(
            "X is {}x{} but B has {} rows",
            x.rows(),
            x.cols(),
            b.rows()
        )));
    }
    if let Some(s) = s {
        if s.shape() != x.shape() {
            return Err(SpcaError::Shape(format!(
                "S is {}x{} but X is {}x{}",
                s.rows(),
                s.cols(),
                x.rows(),
                x.cols()
            )));
        }
    }
    update_view(x.view(), b.view(), s.map(DenseMatrix::view))
}

pub(crate) fn update_view(
    x: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    s: Option<ArrayView2<'_, f64>>,
) -> Result<OrthonormalFactor> {
    let xb = x.dot(&b);
    update_from_xb(x, xb.view(), s)
}

pub(crate) fn update_from_xb(
    x: ArrayView2<'_, f64>,
    xb: ArrayView2<'_, f64>,
    s: Option<ArrayView2<'_, f64>>,
) -> Result<OrthonormalFactor> {
    let target = match s {
        None => x.t().dot(&xb),
        Some(s) => x.t().dot(&xb) - s.t().dot(&xb),
    };
    polar_view(target.view())
}
