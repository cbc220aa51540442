mod common;

use common::{grid_argmin_2d, prox_grid_oracle, prox_objective, rng, uniform};
use ndarray::{array, Array2};
use proptest::prelude::*;
use spca::prox::{eval_psi, prox};
use spca::{RegularizerKind, RegularizerSpec};

const SCALAR_KINDS: [RegularizerKind; 4] = [
    RegularizerKind::L0,
    RegularizerKind::L1,
    RegularizerKind::L0Ridge,
    RegularizerKind::L1Ridge,
];

fn spec_for(kind: RegularizerKind, alpha: f64, beta: f64) -> RegularizerSpec {
    match kind {
        RegularizerKind::L0 => RegularizerSpec::l0(alpha),
        RegularizerKind::L1 => RegularizerSpec::l1(alpha),
        RegularizerKind::L0Ridge => RegularizerSpec::l0_ridge(alpha, beta),
        RegularizerKind::L1Ridge => RegularizerSpec::l1_ridge(alpha, beta),
        RegularizerKind::None => RegularizerSpec::none(),
        RegularizerKind::GroupLasso => unreachable!(),
    }
}

fn prox_scalar(spec: &RegularizerSpec, x: f64, gamma: f64) -> f64 {
    prox(spec, array![[x]].view(), gamma).unwrap()[[0, 0]]
}

fn kind_strategy() -> impl Strategy<Value = RegularizerKind> {
    prop::sample::select(vec![
        RegularizerKind::None,
        RegularizerKind::L0,
        RegularizerKind::L1,
        RegularizerKind::L0Ridge,
        RegularizerKind::L1Ridge,
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prox_beats_sampled_perturbations(
        kind in kind_strategy(),
        x in -5.0f64..5.0,
        alpha in 0.0f64..2.0,
        beta in 0.0f64..2.0,
        gamma in 0.05f64..2.0,
        deltas in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let beta = if matches!(kind, RegularizerKind::L0Ridge | RegularizerKind::L1Ridge) { beta } else { 0.0 };
        let spec = spec_for(kind, alpha, beta);
        let p = prox_scalar(&spec, x, gamma);
        let at = prox_objective(kind, alpha, beta, gamma, x, p);
        for d in deltas {
            let other = prox_objective(kind, alpha, beta, gamma, x, p + d);
            prop_assert!(at <= other + 1e-12, "z = {} beats prox {p}: {other} < {at}", p + d);
        }
        // the zero candidate matters for the discontinuous penalties
        prop_assert!(at <= prox_objective(kind, alpha, beta, gamma, x, 0.0) + 1e-12);
    }

    #[test]
    fn convex_prox_is_nonexpansive(
        convex in prop::sample::select(vec![RegularizerKind::None, RegularizerKind::L1, RegularizerKind::L1Ridge]),
        seed in any::<u64>(),
        alpha in 0.0f64..2.0,
        beta in 0.0f64..2.0,
        gamma in 0.05f64..2.0,
    ) {
        let beta = if convex == RegularizerKind::L1Ridge { beta } else { 0.0 };
        let spec = spec_for(convex, alpha, beta);
        let mut r = rng(seed);
        let x = common::gaussian(&mut r, 6, 3) * 2.0;
        let y = common::gaussian(&mut r, 6, 3) * 2.0;
        let px = prox(&spec, x.view(), gamma).unwrap();
        let py = prox(&spec, y.view(), gamma).unwrap();
        prop_assert!(common::fro(&(&px - &py)) <= common::fro(&(&x - &y)) * (1.0 + 1e-12));
    }

    #[test]
    fn group_prox_is_nonexpansive(seed in any::<u64>(), alpha in 0.0f64..3.0, gamma in 0.05f64..2.0) {
        let spec = RegularizerSpec::group_lasso(alpha, vec![vec![0, 3], vec![1], vec![2, 4, 5]]);
        let mut r = rng(seed);
        let x = common::gaussian(&mut r, 6, 2);
        let y = common::gaussian(&mut r, 6, 2);
        let px = prox(&spec, x.view(), gamma).unwrap();
        let py = prox(&spec, y.view(), gamma).unwrap();
        prop_assert!(common::fro(&(&px - &py)) <= common::fro(&(&x - &y)) * (1.0 + 1e-12));
    }

    #[test]
    fn thresholding_never_grows_entries(
        kind in kind_strategy(),
        seed in any::<u64>(),
        alpha in 0.0f64..2.0,
        beta in 0.0f64..2.0,
        gamma in 0.05f64..2.0,
    ) {
        let beta = if matches!(kind, RegularizerKind::L0Ridge | RegularizerKind::L1Ridge) { beta } else { 0.0 };
        let spec = spec_for(kind, alpha, beta);
        let x = common::gaussian(&mut rng(seed), 5, 4) * 3.0;
        let p = prox(&spec, x.view(), gamma).unwrap();
        for (pv, xv) in p.iter().zip(x.iter()) {
            prop_assert!(pv.abs() <= xv.abs());
            prop_assert!(*pv == 0.0 || pv.signum() == xv.signum());
        }
    }

    #[test]
    fn zero_is_preserved(kind in kind_strategy(), alpha in 0.0f64..2.0, gamma in 0.05f64..2.0) {
        let beta = if matches!(kind, RegularizerKind::L0Ridge | RegularizerKind::L1Ridge) { 0.7 } else { 0.0 };
        let spec = spec_for(kind, alpha, beta);
        let z = Array2::<f64>::zeros((4, 3));
        prop_assert_eq!(prox(&spec, z.view(), gamma).unwrap(), z.clone());
        let group = RegularizerSpec::group_lasso(alpha, vec![vec![0, 1], vec![2, 3]]);
        prop_assert_eq!(prox(&group, z.view(), gamma).unwrap(), z);
    }
}

#[test]
fn scalar_prox_matches_grid_search() {
    let mut r = rng(2024);
    for &kind in &SCALAR_KINDS {
        for _ in 0..50 {
            let x = uniform(&mut r, -4.0, 4.0);
            let gamma = uniform(&mut r, 0.1, 2.0);
            let alpha = uniform(&mut r, 0.0, 2.0);
            let beta = if matches!(kind, RegularizerKind::L0Ridge | RegularizerKind::L1Ridge) {
                uniform(&mut r, 0.0, 2.0)
            } else {
                0.0
            };
            let p = prox_scalar(&spec_for(kind, alpha, beta), x, gamma);
            let (z, _) = prox_grid_oracle(kind, alpha, beta, gamma, x, 1e-4);
            assert!(
                (p - z).abs() <= 1e-3,
                "{kind:?} x={x} gamma={gamma} alpha={alpha} beta={beta}: prox {p}, grid {z}"
            );
        }
    }
}

#[test]
fn group_prox_matches_two_dimensional_grid_search() {
    let mut r = rng(77);
    for _ in 0..50 {
        let x = (uniform(&mut r, -3.0, 3.0), uniform(&mut r, -3.0, 3.0));
        let gamma = uniform(&mut r, 0.1, 2.0);
        let alpha = uniform(&mut r, 0.0, 2.0);
        let spec = RegularizerSpec::group_lasso(alpha, vec![vec![0, 1]]);
        let p = prox(&spec, array![[x.0], [x.1]].view(), gamma).unwrap();
        let f = |a: f64, b: f64| {
            alpha * (a * a + b * b).sqrt() + ((a - x.0).powi(2) + (b - x.1).powi(2)) / (2.0 * gamma)
        };
        let ((za, zb), _) = grid_argmin_2d(f, (0.0, 0.0), 3.5, 1e-2, 1e-4);
        let dist = ((p[[0, 0]] - za).powi(2) + (p[[1, 0]] - zb).powi(2)).sqrt();
        assert!(
            dist <= 1e-3,
            "x={x:?} gamma={gamma} alpha={alpha}: prox {p:?}, grid ({za}, {zb})"
        );
    }
}

#[test]
fn psi_examples_from_definitions() {
    assert_eq!(
        eval_psi(&RegularizerSpec::l1(2.0), array![[1.0, -3.0]].view()),
        8.0
    );
    assert_eq!(
        eval_psi(
            &RegularizerSpec::l0(1.0),
            array![[1.0, 0.0], [-2.0, 0.5]].view()
        ),
        3.0
    );
    assert_eq!(
        eval_psi(&RegularizerSpec::l1_ridge(1.0, 1.0), array![[2.0]].view()),
        6.0
    );
    assert_eq!(
        eval_psi(&RegularizerSpec::none(), array![[2.0]].view()),
        0.0
    );
    let group = RegularizerSpec::group_lasso(0.5, vec![vec![0, 1], vec![2]]);
    // column norms: ||(3,4)|| = 5 and |-2| = 2, twice
    assert_eq!(
        eval_psi(&group, array![[3.0, 3.0], [4.0, 4.0], [-2.0, -2.0]].view()),
        7.0
    );
}
