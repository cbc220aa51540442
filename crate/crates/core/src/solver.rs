//! Variable-projected proximal gradient for sparse PCA.
//!
//! The orthonormal factor `A` is eliminated in closed form (Procrustes), which
//! leaves the value function `v(B) = min_A 1/2 ||X - X B A^T||_F^2`. Each
//! iteration takes one proximal gradient step on `v(B) + psi(B)` with step
//! `gamma = 1 / ||X||_2^2` and then re-solves for `A`.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::matrix::{
    frobenius_sq, orthonormalize, spectral_norm_sq_view, svd_view, DenseMatrix, POWER_MAX_ITER,
    POWER_TOL,
};
use crate::procrustes::{update_from_xb, OrthonormalFactor};
use crate::prox::{eval_psi, prox, RegularizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "gamma")]
pub enum StepPolicy {
    /// `gamma = 1 / ((1 + tol) * ||X||_2^2)` with the norm from power iteration.
    InverseLipschitz,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// `A_0 = B_0 =` top-k right singular vectors.
    Pca,
    /// Gaussian `B_0` drawn from the configured seed, `A_0 = A(B_0)`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: usize,
    pub regularizer: RegularizerSpec,
    pub max_iter: usize,
    pub tol: f64,
    pub step: StepPolicy,
    /// Consumed by callers that prepare the data; the solvers use `X` as given.
    pub center: bool,
    pub seed: u64,
    pub randomized: bool,
    pub oversample: usize,
    pub power_iters: usize,
    pub huber_kappa: Option<f64>,
    pub fista: bool,
    pub init: Initialization,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            regularizer: RegularizerSpec::none(),
            max_iter: 1000,
            tol: 1e-5,
            step: StepPolicy::InverseLipschitz,
            center: true,
            seed: 0,
            randomized: false,
            oversample: 10,
            power_iters: 2,
            huber_kappa: None,
            fista: false,
            init: Initialization::Pca,
        }
    }

    pub fn with_regularizer(mut self, regularizer: RegularizerSpec) -> Self {
        self.regularizer = regularizer;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: Initialization) -> Self {
        self.init = init;
        self
    }

    pub fn with_huber_kappa(mut self, kappa: f64) -> Self {
        self.huber_kappa = Some(kappa);
        self
    }

    pub fn randomized(mut self, oversample: usize, power_iters: usize) -> Self {
        self.randomized = true;
        self.oversample = oversample;
        self.power_iters = power_iters;
        self
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rank == 0 || self.rank > rows.min(cols) {
            return Err(SpcaError::Config(format!(
                "rank must be in 1..={} for a {rows}x{cols} matrix, got {}",
                rows.min(cols),
                self.rank
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SpcaError::Config(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if let StepPolicy::Fixed(g) = self.step {
            if !(g > 0.0 && g.is_finite()) {
                return Err(SpcaError::Config(format!(
                    "step size must be positive, got {g}"
                )));
            }
        }
        if let Some(kappa) = self.huber_kappa {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(SpcaError::Config(format!(
                    "Huber threshold must be positive, got {kappa}"
                )));
            }
        }
        self.regularizer.validate(cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Proximal-residual stationarity fell below the tolerance.
    Stationarity,
    /// Relative objective change fell below the tolerance.
    ObjectiveChange,
    MaxIter,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIter)
    }

    /// `"converged"` or `"max_iter"`.
    pub fn label(self) -> &'static str {
        if self.converged() {
            "converged"
        } else {
            "max_iter"
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpcaResult {
    pub a: OrthonormalFactor,
    pub b: DenseMatrix,
    /// Sparse outliers, robust solver only.
    pub s: Option<DenseMatrix>,
    /// Objective at the starting point.
    pub initial_objective: f64,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
    /// Stationarity measure of each iteration's step.
    pub stationarity_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub step_size: f64,
    /// Threshold actually used by the robust solver.
    pub huber_kappa: Option<f64>,
}

impl SpcaResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }

    pub fn final_stationarity(&self) -> f64 {
        self.stationarity_trace.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// QR-adjusted variance of each component, `R_jj^2` for `XB = QR`.
    pub per_component: Vec<f64>,
    /// Running sums of `per_component` as fractions of `trace(X^T X)`.
    pub cumulative: Vec<f64>,
    pub total_variance: f64,
}

/// `1/2 ||X - X B A^T||_F^2 + psi(B)`.
pub fn objective(
    x: &DenseMatrix,
    a: &OrthonormalFactor,
    b: &DenseMatrix,
    regularizer: &RegularizerSpec,
) -> Result<f64> {
    check_factors(x, a.view(), b.view())?;
    let xb = x.view().dot(&b.view());
    Ok(misfit(x.view(), xb.view(), a.view(), None) + eval_psi(regularizer, b.view()))
}

fn check_factors(x: &DenseMatrix, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if b.nrows() != x.cols() || a.nrows() != x.cols() || a.ncols() != b.ncols() {
        return Err(SpcaError::Shape(format!(
            "X is {}x{}, A is {}x{}, B is {}x{}",
            x.rows(),
            x.cols(),
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// `1/2 ||X - XB A^T - S||_F^2`, evaluated entrywise.
pub(crate) fn misfit(
    x: ArrayView2<'_, f64>,
    xb: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s: Option<ArrayView2<'_, f64>>,
) -> f64 {
    0.5 * frobenius_sq(residual(x, xb, a, s).view())
}

pub(crate) fn residual(
    x: ArrayView2<'_, f64>,
    xb: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s: Option<ArrayView2<'_, f64>>,
) -> Array2<f64> {
    let mut r = x.to_owned();
    ndarray::linalg::general_mat_mul(-1.0, &xb, &a.t(), 1.0, &mut r);
    if let Some(s) = s {
        r -= &s;
    }
    r
}

/// Value function, its gradient and the minimizing factor at `b`.
///
/// The gradient is `-X^T (X - X B A^T) A` with `A = A(B)`, the descent
/// direction convention used by the B-update. `v` is not differentiable at
/// `B = 0`.
pub fn value_and_gradient(
    x: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<(f64, DenseMatrix, OrthonormalFactor)> {
    if x.cols() != b.rows() {
        return Err(SpcaError::Shape(format!(
            "X has {} columns but B has {} rows",
            x.cols(),
            b.rows()
        )));
    }
    let xv = x.view();
    let xb = xv.dot(&b.view());
    let a = update_from_xb(xv, xb.view(), None)?;
    let r = residual(xv, xb.view(), a.view(), None);
    let value = 0.5 * frobenius_sq(r.view());
    let grad = -xv.t().dot(&r.dot(&a.view()));
    Ok((value, DenseMatrix::new(grad)?, a))
}

/// Proximal-gradient residual `(1/gamma)^2 ||b_prev - b_next||_F^2`; zero exactly
/// at fixed points of the B-update.
pub fn stationarity(b_prev: &DenseMatrix, b_next: &DenseMatrix, gamma: f64) -> Result<f64> {
    if b_prev.shape() != b_next.shape() {
        return Err(SpcaError::Shape(format!(
            "iterates differ in shape: {:?} vs {:?}",
            b_prev.shape(),
            b_next.shape()
        )));
    }
    Ok(step_residual(b_prev.view(), b_next.view(), gamma))
}

pub(crate) fn step_residual(
    prev: ArrayView2<'_, f64>,
    next: ArrayView2<'_, f64>,
    gamma: f64,
) -> f64 {
    frobenius_sq((&prev - &next).view()) / (gamma * gamma)
}

pub(crate) fn step_size(x: ArrayView2<'_, f64>, policy: StepPolicy) -> Result<f64> {
    match policy {
        StepPolicy::Fixed(g) => {
            if x.iter().all(|&v| v == 0.0) {
                return Err(SpcaError::ZeroMatrix);
            }
            Ok(g)
        }
        StepPolicy::InverseLipschitz => {
            let lip = spectral_norm_sq_view(x, POWER_TOL, POWER_MAX_ITER)? * (1.0 + POWER_TOL);
            Ok(1.0 / lip)
        }
    }
}

pub(crate) fn initial_loadings(
    x: ArrayView2<'_, f64>,
    config: &SolverConfig,
) -> Result<Array2<f64>> {
    let k = config.rank;
    match config.init {
        Initialization::Pca => {
            let svd = svd_view(x)?;
            Ok(svd.v.slice(ndarray::s![.., ..k]).to_owned())
        }
        Initialization::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let g =
                Array2::from_shape_simple_fn((x.ncols(), k), || StandardNormal.sample(&mut rng));
            orthonormalize(g.view())
        }
    }
}

/// Flips each loading column so its largest-magnitude entry is positive,
/// flipping the matching factor column with it.
pub(crate) fn canonicalize_signs(b: &mut Array2<f64>, a: &mut OrthonormalFactor) {
    for j in 0..b.ncols() {
        let col = b.column(j);
        let pivot = col.iter().copied().fold(
            0.0_f64,
            |best, v| if v.abs() > best.abs() { v } else { best },
        );
        if pivot < 0.0 {
            b.column_mut(j).mapv_inplace(|v| -v);
            a.flip_column(j);
        }
    }
}

pub(crate) fn relative_change(prev: f64, next: f64) -> f64 {
    (next - prev).abs() / prev.abs().max(1.0)
}

/// Runs the variable-projected proximal gradient method on `x`.
pub fn solve(x: &DenseMatrix, config: &SolverConfig) -> Result<SpcaResult> {
    config.validate(x.rows(), x.cols())?;
    if x.is_zero() {
        return Err(SpcaError::ZeroMatrix);
    }
    let xv = x.view();
    let gamma = step_size(xv, config.step)?;
    let reg = &config.regularizer;

    let mut b = initial_loadings(xv, config)?;
    let xb = xv.dot(&b);
    let mut a = match config.init {
        Initialization::Pca => OrthonormalFactor::from_trusted(b.clone()),
        Initialization::Random => update_from_xb(xv, xb.view(), None)?,
    };
    let initial_objective = misfit(xv, xb.view(), a.view(), None) + eval_psi(reg, b.view());
    let mut f = initial_objective;

    let mut objective_trace = Vec::new();
    let mut stationarity_trace = Vec::new();
    let mut termination = Termination::MaxIter;

    // momentum state, used only when config.fista is set
    let mut y = b.clone();
    let mut t = 1.0_f64;

    for iter in 1..=config.max_iter {
        let (point, a_point) = if config.fista {
            let xy = xv.dot(&y);
            (y.clone(), update_from_xb(xv, xy.view(), None)?)
        } else {
            (b.clone(), a.clone())
        };
        // X^T X (B - A): the B-gradient of 1/2||X - X B A^T||^2 when A^T A = I
        let diff = &point - a_point.as_array();
        let grad = xv.t().dot(&xv.dot(&diff));
        let b_next = prox(reg, (&point - &(gamma * &grad)).view(), gamma)?;
        let xb_next = xv.dot(&b_next);
        let a_next = update_from_xb(xv, xb_next.view(), None)?;
        let f_next = misfit(xv, xb_next.view(), a_next.view(), None) + eval_psi(reg, b_next.view());
        if !f_next.is_finite() || b_next.iter().any(|v| !v.is_finite()) {
            return Err(SpcaError::NonFinite { iteration: iter });
        }
        let station = step_residual(b.view(), b_next.view(), gamma);

        if config.fista {
            if f_next > f {
                // restart momentum on objective increase
                y = b_next.clone();
                t = 1.0;
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                y = &b_next + &(((t - 1.0) / t_next) * (&b_next - &b));
                t = t_next;
            }
        }

        let change = relative_change(f, f_next);
        objective_trace.push(f_next);
        stationarity_trace.push(station);
        b = b_next;
        a = a_next;
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
        "solve: {} iterations, termination {:?}, objective {:.6e}",
        iterations,
        termination,
        f
    );
    Ok(SpcaResult {
        a,
        b: DenseMatrix::new(b)?,
        s: None,
        initial_objective,
        objective_trace,
        stationarity_trace,
        iterations,
        termination,
        step_size: gamma,
        huber_kappa: None,
    })
}

/// Components `Z = X B` and the reconstruction `Z A^T`.
pub fn extract_components(
    x: &DenseMatrix,
    result: &SpcaResult,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_factors(x, result.a.view(), result.b.view())?;
    let z = x.view().dot(&result.b.view());
    let recon = z.dot(&result.a.view().t());
    Ok((DenseMatrix::new(z)?, DenseMatrix::new(recon)?))
}

/// Explained variance of the sparse components.
///
/// Sparse components are generally correlated, so each component is credited
/// only with the variance not already explained by its predecessors: the
/// squared diagonal of `R` in `X B = Q R`.
pub fn explained_variance(x: &DenseMatrix, result: &SpcaResult) -> Result<VarianceReport> {
    check_factors(x, result.a.view(), result.b.view())?;
    let z = x.view().dot(&result.b.view());
    let total = frobenius_sq(x.view());
    let per_component: Vec<f64> = if z.iter().all(|&v| v == 0.0) {
        vec![0.0; z.ncols()]
    } else {
        use ndarray_linalg::QR;
        let (_, r) = z.qr().map_err(|_| SpcaError::Convergence {
            routine: "QR",
            rows: z.nrows(),
            cols: z.ncols(),
        })?;
        r.diag().iter().map(|d| d * d).collect()
    };
    let mut running = 0.0;
    let cumulative = per_component
        .iter()
        .map(|v| {
            running += v;
            if total > 0.0 {
                running / total
            } else {
                0.0
            }
        })
        .collect();
    Ok(VarianceReport {
        per_component,
        cumulative,
        total_variance: total,
    })
}
