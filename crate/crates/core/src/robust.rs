//! Robust sparse PCA with the Huber loss.
//!
//! The Huber loss is the Moreau envelope of `kappa |.|`, so the robust problem
//! is rewritten with an explicit outlier matrix `S`:
//!
//! `f_H(A, B, S) = 1/2 ||X - X B A^T - S||_F^2 + psi(B) + kappa ||S||_1`
//!
//! and minimized block by block: a proximal gradient step in `B`, the exact
//! Procrustes minimizer in `A`, and the exact soft-thresholding minimizer in `S`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::matrix::{frobenius_sq, l1_norm, DenseMatrix};
use crate::procrustes::{update_from_xb, OrthonormalFactor};
use crate::prox::{eval_psi, prox, soft_threshold, RegularizerSpec};
use crate::solver::{
    canonicalize_signs, initial_loadings, misfit, relative_change, residual, step_size,
    Initialization, SolverConfig, SpcaResult, Termination,
};

/// Scale factor turning a median absolute deviation into a Gaussian standard deviation.
const MAD_TO_SIGMA: f64 = 1.4826;
/// Huber threshold with 95% asymptotic efficiency under Gaussian noise, in units of sigma.
const HUBER_EFFICIENCY_95: f64 = 1.345;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberSpec {
    pub kappa: f64,
}

impl HuberSpec {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(SpcaError::Config(format!(
                "Huber threshold must be positive, got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }
}

/// `x^2/2` for `|x| <= kappa`, `kappa |x| - kappa^2/2` beyond.
pub fn huber_loss(x: f64, kappa: f64) -> f64 {
    let ax = x.abs();
    if ax > kappa {
        kappa * ax - 0.5 * kappa * kappa
    } else {
        0.5 * x * x
    }
}

/// Entrywise sum of [`huber_loss`].
pub fn huber_loss_matrix(m: ArrayView2<'_, f64>, kappa: f64) -> f64 {
    m.iter().map(|&v| huber_loss(v, kappa)).sum()
}

/// `f_H(A, B, S)`.
pub fn objective_robust(
    x: &DenseMatrix,
    a: &OrthonormalFactor,
    b: &DenseMatrix,
    s: &DenseMatrix,
    regularizer: &RegularizerSpec,
    kappa: f64,
) -> Result<f64> {
    if s.shape() != x.shape() || b.rows() != x.cols() || a.as_array().dim() != b.shape() {
        return Err(SpcaError::Shape(format!(
            "X {:?}, A {:?}, B {:?}, S {:?} do not conform",
            x.shape(),
            a.as_array().dim(),
            b.shape(),
            s.shape()
        )));
    }
    let xb = x.view().dot(&b.view());
    Ok(robust_value(
        x.view(),
        xb.view(),
        a.view(),
        b.view(),
        s.view(),
        regularizer,
        kappa,
    ))
}

fn robust_value(
    x: ArrayView2<'_, f64>,
    xb: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    regularizer: &RegularizerSpec,
    kappa: f64,
) -> f64 {
    misfit(x, xb, a, Some(s)) + eval_psi(regularizer, b) + kappa * l1_norm(s)
}

/// `1.345 * 1.4826 * MAD(r)`, falling back to the RMS of `r` (then to a
/// vanishing multiple of the data scale) when the MAD is zero.
pub fn default_kappa(r: ArrayView2<'_, f64>, data_scale: f64) -> f64 {
    let mut vals: Vec<f64> = r.iter().copied().collect();
    let med = median(&mut vals);
    let mut dev: Vec<f64> = vals.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev);
    let scale = if mad > 0.0 {
        MAD_TO_SIGMA * mad
    } else {
        let rms = (frobenius_sq(r) / r.len() as f64).sqrt();
        if rms > 0.0 {
            rms
        } else {
            f64::EPSILON * data_scale.max(f64::MIN_POSITIVE)
        }
    };
    HUBER_EFFICIENCY_95 * scale
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn soft_threshold_matrix(r: &Array2<f64>, kappa: f64) -> Array2<f64> {
    r.mapv(|v| soft_threshold(v, kappa))
}

/// Gauss-Seidel proximal gradient over `(B, A, S)`.
///
/// The recorded stationarity of a cycle is `(1/gamma)^2 ||dB||^2 + ||dS||^2`;
/// `S` moves with unit step. Termination follows [`crate::solver::solve`].
pub fn solve_robust(x: &DenseMatrix, config: &SolverConfig) -> Result<SpcaResult> {
    config.validate(x.rows(), x.cols())?;
    if x.is_zero() {
        return Err(SpcaError::ZeroMatrix);
    }
    let xv = x.view();
    let gamma = step_size(xv, config.step)?;
    let reg = &config.regularizer;

    let mut b = initial_loadings(xv, config)?;
    let xb0 = xv.dot(&b);
    let mut a = match config.init {
        Initialization::Pca => OrthonormalFactor::from_trusted(b.clone()),
        Initialization::Random => update_from_xb(xv, xb0.view(), None)?,
    };
    let kappa = match config.huber_kappa {
        Some(k) => k,
        None => {
            let r0 = residual(xv, xb0.view(), a.view(), None);
            let scale = xv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            default_kappa(r0.view(), scale)
        }
    };
    let kappa = HuberSpec::new(kappa)?.kappa;

    let mut s = Array2::<f64>::zeros(x.shape());
    let initial_objective = robust_value(xv, xb0.view(), a.view(), b.view(), s.view(), reg, kappa);
    let mut f = initial_objective;

    let mut objective_trace = Vec::new();
    let mut stationarity_trace = Vec::new();
    let mut termination = Termination::MaxIter;

    for iter in 1..=config.max_iter {
        // B-step: gradient of 1/2||X - X B A^T - S||^2 is X^T (X B A^T - X + S) A
        let xb = xv.dot(&b);
        let r = residual(xv, xb.view(), a.view(), Some(s.view()));
        let grad = -xv.t().dot(&r.dot(&a.view()));
        let b_next = prox(reg, (&b - &(gamma * &grad)).view(), gamma)?;

        // A-step: polar((X - S)^T X B)
        let xb_next = xv.dot(&b_next);
        let a_next = update_from_xb(xv, xb_next.view(), Some(s.view()))?;

        // S-step: soft threshold of the low-rank residual
        let r_next = residual(xv, xb_next.view(), a_next.view(), None);
        let s_next = soft_threshold_matrix(&r_next, kappa);

        let f_next = robust_value(
            xv,
            xb_next.view(),
            a_next.view(),
            b_next.view(),
            s_next.view(),
            reg,
            kappa,
        );
        if !f_next.is_finite() || b_next.iter().any(|v| !v.is_finite()) {
            return Err(SpcaError::NonFinite { iteration: iter });
        }
        let station = frobenius_sq((&b - &b_next).view()) / (gamma * gamma)
            + frobenius_sq((&s - &s_next).view());
        let change = relative_change(f, f_next);

        objective_trace.push(f_next);
        stationarity_trace.push(station);
        b = b_next;
        a = a_next;
        s = s_next;
        f = f_next;

        if station < config.tol {
            termination = Termination::Stationarity;
            break;
        }
        if change < config.tol {
            termination = Termination::ObjectiveChange;
            break;
        }
    }

    canonicalize_signs(&mut b, &mut a);
    let iterations = objective_trace.len();
    log::debug!(
        "solve_robust: {iterations} cycles, kappa {kappa:.4e}, termination {termination:?}"
    );
    Ok(SpcaResult {
        a,
        b: DenseMatrix::new(b)?,
        s: Some(DenseMatrix::new(s)?),
        initial_objective,
        objective_trace,
        stationarity_trace,
        iterations,
        termination,
        step_size: gamma,
        huber_kappa: Some(kappa),
    })
}
