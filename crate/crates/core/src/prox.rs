//! Sparsity-inducing regularizers and their proximal operators.
//!
//! Every operator computes `argmin_z psi(z) + 1/(2 gamma) ||z - x||^2`. The
//! separable penalties act entrywise; the group lasso acts on row blocks of
//! each column independently, one column being one component's loadings.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::matrix::{frobenius_sq, l1_norm, vector_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    None,
    L0,
    L1,
    /// `alpha ||x||_0 + beta ||x||_2^2`
    L0Ridge,
    /// `alpha ||x||_1 + beta ||x||_2^2` (elastic net)
    L1Ridge,
    /// `alpha * sum_g ||x_g||_2`
    GroupLasso,
}

impl RegularizerKind {
    pub fn is_convex(self) -> bool {
        !matches!(self, RegularizerKind::L0 | RegularizerKind::L0Ridge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub alpha: f64,
    pub beta: f64,
    /// Zero-based row indices, one vector per group. Required for the group lasso.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl RegularizerSpec {
    pub fn none() -> Self {
        Self {
            kind: RegularizerKind::None,
            alpha: 0.0,
            beta: 0.0,
            groups: None,
        }
    }

    pub fn l0(alpha: f64) -> Self {
        Self {
            kind: RegularizerKind::L0,
            alpha,
            ..Self::none()
        }
    }

    pub fn l1(alpha: f64) -> Self {
        Self {
            kind: RegularizerKind::L1,
            alpha,
            ..Self::none()
        }
    }

    pub fn l0_ridge(alpha: f64, beta: f64) -> Self {
        Self {
            kind: RegularizerKind::L0Ridge,
            alpha,
            beta,
            groups: None,
        }
    }

    pub fn l1_ridge(alpha: f64, beta: f64) -> Self {
        Self {
            kind: RegularizerKind::L1Ridge,
            alpha,
            beta,
            groups: None,
        }
    }

    pub fn group_lasso(alpha: f64, groups: Vec<Vec<usize>>) -> Self {
        Self {
            kind: RegularizerKind::GroupLasso,
            alpha,
            beta: 0.0,
            groups: Some(groups),
        }
    }

    /// Checks strengths and, for the group lasso, that the groups partition `0..rows`.
    pub fn validate(&self, rows: usize) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(SpcaError::Config(format!(
                "alpha must be finite and nonnegative, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(SpcaError::Config(format!(
                "beta must be finite and nonnegative, got {}",
                self.beta
            )));
        }
        let ridge = matches!(
            self.kind,
            RegularizerKind::L0Ridge | RegularizerKind::L1Ridge
        );
        if !ridge && self.beta != 0.0 {
            return Err(SpcaError::Config(format!(
                "beta is only meaningful for ridge-combined penalties, got beta = {} for {:?}",
                self.beta, self.kind
            )));
        }
        match (&self.kind, &self.groups) {
            (RegularizerKind::GroupLasso, None) => Err(SpcaError::Config(
                "group lasso requires a group partition".into(),
            )),
            (RegularizerKind::GroupLasso, Some(groups)) => check_partition(groups, rows),
            (_, Some(_)) => Err(SpcaError::Config(
                "groups are only accepted with the group lasso".into(),
            )),
            (_, None) => Ok(()),
        }
    }
}

fn check_partition(groups: &[Vec<usize>], rows: usize) -> Result<()> {
    let mut seen = vec![false; rows];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(SpcaError::Config(format!("group {g} is empty")));
        }
        for &i in members {
            if i >= rows {
                return Err(SpcaError::Config(format!(
                    "group {g} references row {i} but there are only {rows} rows"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(SpcaError::Config(format!(
                    "row {i} belongs to more than one group"
                )));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(SpcaError::Config(format!("row {i} is not in any group")));
    }
    Ok(())
}

/// Soft thresholding `sign(x) max(|x| - t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Proximal operator of `gamma * psi` applied to `x`.
///
/// Hard thresholds keep an entry only when strictly above the cutoff, so a
/// tie between the zero and nonzero minimizers resolves to zero.
pub fn prox(spec: &RegularizerSpec, x: ArrayView2<'_, f64>, gamma: f64) -> Result<Array2<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SpcaError::Config(format!(
            "prox step must be positive, got {gamma}"
        )));
    }
    let (alpha, beta) = (spec.alpha, spec.beta);
    let out = match spec.kind {
        RegularizerKind::None => x.to_owned(),
        RegularizerKind::L1 => x.mapv(|v| soft_threshold(v, gamma * alpha)),
        RegularizerKind::L0 => {
            let cut = 2.0 * gamma * alpha;
            x.mapv(|v| if v * v > cut { v } else { 0.0 })
        }
        RegularizerKind::L1Ridge => {
            let scale = 1.0 + 2.0 * gamma * beta;
            x.mapv(|v| soft_threshold(v, gamma * alpha) / scale)
        }
        RegularizerKind::L0Ridge => {
            let scale = 1.0 + 2.0 * gamma * beta;
            let cut = 2.0 * gamma * alpha * scale;
            x.mapv(|v| if v * v > cut { v / scale } else { 0.0 })
        }
        RegularizerKind::GroupLasso => {
            let groups = spec.groups.as_ref().ok_or_else(|| {
                SpcaError::Config("group lasso requires a group partition".into())
            })?;
            check_partition(groups, x.nrows())?;
            let t = gamma * alpha;
            let mut out = x.to_owned();
            for mut col in out.axis_iter_mut(Axis(1)) {
                for members in groups {
                    let norm = members.iter().map(|&i| col[i] * col[i]).sum::<f64>().sqrt();
                    let shrink = if norm > t { 1.0 - t / norm } else { 0.0 };
                    for &i in members {
                        col[i] *= shrink;
                    }
                }
            }
            out
        }
    };
    Ok(out)
}

/// Value of `psi(b)`.
pub fn eval_psi(spec: &RegularizerSpec, b: ArrayView2<'_, f64>) -> f64 {
    let nnz = || b.iter().filter(|v| **v != 0.0).count() as f64;
    match spec.kind {
        RegularizerKind::None => 0.0,
        RegularizerKind::L0 => spec.alpha * nnz(),
        RegularizerKind::L1 => spec.alpha * l1_norm(b),
        RegularizerKind::L0Ridge => spec.alpha * nnz() + spec.beta * frobenius_sq(b),
        RegularizerKind::L1Ridge => spec.alpha * l1_norm(b) + spec.beta * frobenius_sq(b),
        RegularizerKind::GroupLasso => {
            let Some(groups) = spec.groups.as_ref() else {
                return 0.0;
            };
            let total: f64 = b
                .axis_iter(Axis(1))
                .map(|col| {
                    groups
                        .iter()
                        .map(|g| {
                            let block: ndarray::Array1<f64> = g.iter().map(|&i| col[i]).collect();
                            vector_norm(block.view())
                        })
                        .sum::<f64>()
                })
                .sum();
            spec.alpha * total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar(spec: &RegularizerSpec, x: f64, gamma: f64) -> f64 {
        prox(spec, array![[x]].view(), gamma).unwrap()[[0, 0]]
    }

    #[test]
    fn soft_thresholding_examples() {
        let spec = RegularizerSpec::l1(1.0);
        assert_eq!(scalar(&spec, 2.0, 1.0), 1.0);
        assert_eq!(scalar(&spec, -0.5, 1.0), 0.0);
        assert_eq!(scalar(&spec, -3.0, 1.0), -2.0);
    }

    #[test]
    fn hard_thresholding_examples() {
        // 2 gamma alpha = 1
        let spec = RegularizerSpec::l0(0.5);
        assert_eq!(scalar(&spec, 0.9, 1.0), 0.0);
        assert_eq!(scalar(&spec, 1.1, 1.0), 1.1);
        // exact tie goes to zero
        assert_eq!(scalar(&spec, 1.0, 1.0), 0.0);
    }

    #[test]
    fn scaled_soft_threshold_example() {
        let spec = RegularizerSpec::l1_ridge(1.0, 0.5);
        assert_eq!(scalar(&spec, 3.0, 1.0), 1.0);
    }

    #[test]
    fn scaled_hard_threshold_boundary() {
        // x^2 cutoff 2*gamma*alpha*(1+2*gamma*beta) = 2*1*1*2 = 4
        let spec = RegularizerSpec::l0_ridge(1.0, 0.5);
        assert_eq!(scalar(&spec, 2.0, 1.0), 0.0);
        assert_eq!(scalar(&spec, -2.0, 1.0), 0.0);
        assert_eq!(scalar(&spec, 3.0, 1.0), 1.5);
    }

    #[test]
    fn group_lasso_examples() {
        let spec = RegularizerSpec::group_lasso(1.0, vec![vec![0, 1]]);
        let small = prox(&spec, array![[0.3], [0.4]].view(), 1.0).unwrap();
        assert_eq!(small, array![[0.0], [0.0]]);
        let big = prox(&spec, array![[1.2], [1.6]].view(), 1.0).unwrap();
        assert!((big[[0, 0]] - 0.6).abs() < 1e-15);
        assert!((big[[1, 0]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn group_lasso_columns_are_independent() {
        let spec = RegularizerSpec::group_lasso(1.0, vec![vec![0], vec![1]]);
        let out = prox(&spec, array![[3.0, 0.5], [0.5, 3.0]].view(), 1.0).unwrap();
        assert_eq!(out, array![[2.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn none_is_identity() {
        let x = array![[1.5, -2.0], [0.0, 7.0]];
        assert_eq!(prox(&RegularizerSpec::none(), x.view(), 0.3).unwrap(), x);
    }

    #[test]
    fn group_lasso_without_groups_is_config_error() {
        let spec = RegularizerSpec {
            kind: RegularizerKind::GroupLasso,
            alpha: 1.0,
            beta: 0.0,
            groups: None,
        };
        assert!(matches!(
            prox(&spec, array![[1.0]].view(), 1.0),
            Err(SpcaError::Config(_))
        ));
        assert!(spec.validate(1).is_err());
    }

    #[test]
    fn validation_rules() {
        assert!(RegularizerSpec::l1(-1.0).validate(3).is_err());
        let mut bad_beta = RegularizerSpec::l1(1.0);
        bad_beta.beta = 0.5;
        assert!(bad_beta.validate(3).is_err());
        assert!(
            RegularizerSpec::group_lasso(1.0, vec![vec![0, 1], vec![1, 2]])
                .validate(3)
                .is_err()
        );
        assert!(RegularizerSpec::group_lasso(1.0, vec![vec![0, 1]])
            .validate(3)
            .is_err());
        assert!(RegularizerSpec::group_lasso(1.0, vec![vec![0, 2], vec![1]])
            .validate(3)
            .is_ok());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(
            eval_psi(&RegularizerSpec::l1(2.0), array![[1.0, -3.0]].view()),
            8.0
        );
        assert_eq!(
            eval_psi(
                &RegularizerSpec::l0(1.0),
                array![[1.0, 0.0], [-2.0, 5.0]].view()
            ),
            3.0
        );
        assert_eq!(
            eval_psi(&RegularizerSpec::l1_ridge(1.0, 1.0), array![[2.0]].view()),
            6.0
        );
        assert_eq!(
            eval_psi(&RegularizerSpec::none(), array![[9.0]].view()),
            0.0
        );
        let g = RegularizerSpec::group_lasso(2.0, vec![vec![0, 1]]);
        assert_eq!(eval_psi(&g, array![[3.0], [4.0]].view()), 10.0);
    }

    #[test]
    fn zero_is_fixed_by_every_prox() {
        let specs = [
            RegularizerSpec::none(),
            RegularizerSpec::l0(1.0),
            RegularizerSpec::l1(1.0),
            RegularizerSpec::l0_ridge(1.0, 2.0),
            RegularizerSpec::l1_ridge(1.0, 2.0),
            RegularizerSpec::group_lasso(1.0, vec![vec![0, 1]]),
        ];
        let zero = Array2::<f64>::zeros((2, 3));
        for spec in &specs {
            assert_eq!(prox(spec, zero.view(), 0.7).unwrap(), zero);
        }
    }
}
