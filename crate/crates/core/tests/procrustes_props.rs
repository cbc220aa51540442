mod common;

use common::{fro, gaussian, gaussian_matrix, misfit, random_orthonormal, rng};
use ndarray::{array, s, Array2};
use proptest::prelude::*;
use spca::matrix::{orthonormality_defect, thin_svd};
use spca::procrustes::{polar_factor, procrustes_update};
use spca::DenseMatrix;

fn trace_inner(m: &Array2<f64>, a: &Array2<f64>) -> f64 {
    (m * a).sum()
}

/// `[[c, -s], [s, c]]` for `det = +1`, `[[c, s], [s, -c]]` for `det = -1`.
fn orthogonal_2x2(theta: f64, det: f64) -> Array2<f64> {
    let (sn, c) = theta.sin_cos();
    if det > 0.0 {
        array![[c, -sn], [sn, c]]
    } else {
        array![[c, sn], [sn, -c]]
    }
}

/// Brute force over 10^6 angles for each determinant sign.
fn angle_grid_oracle(m: &Array2<f64>) -> (f64, f64) {
    const N: usize = 1_000_000;
    let mut best = (f64::NEG_INFINITY, 0.0, 1.0);
    for det in [1.0, -1.0] {
        for i in 0..N {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / N as f64;
            let v = trace_inner(m, &orthogonal_2x2(theta, det));
            if v > best.0 {
                best = (v, theta, det);
            }
        }
    }
    (best.1, best.2)
}

fn angle_of(a: &Array2<f64>) -> (f64, f64) {
    let det = a[[0, 0]] * a[[1, 1]] - a[[0, 1]] * a[[1, 0]];
    let theta = a[[1, 0]]
        .atan2(a[[0, 0]])
        .rem_euclid(2.0 * std::f64::consts::PI);
    (theta, det.signum())
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn polar_factor_beats_random_orthonormal_competitors(seed in any::<u64>(), k in 1usize..=5, extra in 0usize..=10) {
        let p = k + extra;
        let mut r = rng(seed);
        let m = gaussian(&mut r, p, k);
        let a = polar_factor(&DenseMatrix::new(m.clone()).unwrap()).unwrap();
        prop_assert!(orthonormality_defect(a.view()) <= 1e-8);
        let best = trace_inner(&m, a.as_array());
        for _ in 0..50 {
            let competitor = random_orthonormal(&mut r, p, k);
            prop_assert!(best >= trace_inner(&m, &competitor) - 1e-12);
        }
    }

    #[test]
    fn procrustes_update_minimizes_the_misfit(seed in any::<u64>(), n in 5usize..=20, p in 3usize..=12, k in 1usize..=3) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, p);
        let b = gaussian_matrix(&mut r, p, k);
        let a = procrustes_update(&x, &b, None).unwrap();
        let at = misfit(x.as_array(), b.as_array(), a.as_array());
        for _ in 0..50 {
            let competitor = random_orthonormal(&mut r, p, k);
            let other = misfit(x.as_array(), b.as_array(), &competitor);
            prop_assert!(at <= other + 1e-10 * (1.0 + other), "{at} > {other}");
        }
    }

    #[test]
    fn robust_update_minimizes_the_shifted_misfit(seed in any::<u64>(), n in 5usize..=15, p in 3usize..=10) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, p);
        let b = gaussian_matrix(&mut r, p, 2);
        let s = gaussian_matrix(&mut r, n, p);
        let a = procrustes_update(&x, &b, Some(&s)).unwrap();
        let shifted = |a: &Array2<f64>| {
            let res = x.as_array() - s.as_array() - x.as_array().dot(b.as_array()).dot(&a.t());
            res.iter().map(|v| v * v).sum::<f64>()
        };
        let at = shifted(a.as_array());
        for _ in 0..50 {
            prop_assert!(at <= shifted(&random_orthonormal(&mut r, p, 2)) + 1e-10);
        }
    }

    #[test]
    fn rank_deficient_targets_still_give_orthonormal_factors(seed in any::<u64>(), p in 3usize..=10, k in 2usize..=3) {
        let mut r = rng(seed);
        let col = gaussian(&mut r, p, 1);
        let mut m = Array2::<f64>::zeros((p, k));
        for j in 0..k {
            m.column_mut(j).assign(&(&col.column(0) * (j as f64 + 1.0)));
        }
        let a = polar_factor(&DenseMatrix::new(m).unwrap()).unwrap();
        prop_assert!(orthonormality_defect(a.view()) <= 1e-8);
    }
}

#[test]
fn two_by_two_matches_angle_grid() {
    let mut r = rng(31);
    let mut cases: Vec<Array2<f64>> = (0..5).map(|_| gaussian(&mut r, 2, 2)).collect();
    let rot30 = orthogonal_2x2(std::f64::consts::PI / 6.0, 1.0);
    cases.push(rot30.dot(&Array2::from_diag(&array![2.0, 3.0])));
    for m in &cases {
        let a = polar_factor(&DenseMatrix::new(m.clone()).unwrap()).unwrap();
        let (theta, det) = angle_of(a.as_array());
        let (grid_theta, grid_det) = angle_grid_oracle(m);
        assert_eq!(det, grid_det, "determinant sign for {m:?}");
        assert!(
            angle_gap(theta, grid_theta) <= 1e-4,
            "{theta} vs {grid_theta}"
        );
    }
    let a = polar_factor(&DenseMatrix::new(cases[5].clone()).unwrap()).unwrap();
    assert!(fro(&(a.as_array() - &rot30)) <= 1e-12);
}

#[test]
fn singular_vectors_are_their_own_update() {
    let x = gaussian_matrix(&mut rng(8), 30, 12);
    let svd = thin_svd(&x).unwrap();
    let vk = svd.v.slice(s![.., ..4]).to_owned();
    let a = procrustes_update(&x, &DenseMatrix::new(vk.clone()).unwrap(), None).unwrap();
    for j in 0..4 {
        let dot: f64 = a.as_array().column(j).dot(&vk.column(j));
        assert!((dot.abs() - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn outliers_equal_to_data_give_a_deterministic_completion() {
    let x = gaussian_matrix(&mut rng(4), 6, 4);
    let b = gaussian_matrix(&mut rng(5), 4, 2);
    let a1 = procrustes_update(&x, &b, Some(&x)).unwrap();
    let a2 = procrustes_update(&x, &b, Some(&x)).unwrap();
    assert!(orthonormality_defect(a1.view()) <= 1e-8);
    assert_eq!(a1.as_array(), a2.as_array());
}
