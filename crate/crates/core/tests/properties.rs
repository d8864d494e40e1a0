use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use wavefactor::laplacian::{BoundaryCondition, SpatialOperator};
use wavefactor::metrics::{mean_entropy, mode_error, partition_energy, svt_oracle, Partition};
use wavefactor::objective::{objective_value, theta_bar, FactorModel, WaveField};
use wavefactor::polar::{line_search_value, lipschitz_bound, solve_polar};
use wavefactor::solver::{fit, SolverConfig};
use wavefactor::spectral_norm;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn bc() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![
        Just(BoundaryCondition::Dirichlet),
        Just(BoundaryCondition::Neumann),
        Just(BoundaryCondition::DirichletNeumann),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn theta_bar_is_two_homogeneous(
        d in prop::collection::vec(-1.0..1.0f64, 6),
        x in prop::collection::vec(-1.0..1.0f64, 4),
        alpha in 0.05..20.0f64,
        gamma in 0.0..10.0f64,
        bc in bc(),
    ) {
        let op = SpatialOperator::build(6, 0.7, bc).unwrap();
        let (d, x) = (DVector::from_vec(d), DVector::from_vec(x));
        prop_assume!(d.norm() > 1e-3);
        let base = theta_bar(&d, &x, &op, gamma).unwrap();
        let scaled = theta_bar(&(&d * alpha), &(&x * alpha), &op, gamma).unwrap();
        prop_assert!((scaled - alpha * alpha * base).abs() <= 1e-10 * alpha * alpha * base.max(1e-12));
    }

    #[test]
    fn line_search_is_lipschitz(
        z in matrix(7, 3),
        a in 0.0..4.0f64,
        b in 0.0..4.0f64,
        log_gamma in -2.0..3.0f64,
    ) {
        let gamma = 10f64.powf(log_gamma);
        let op = SpatialOperator::build(7, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let fa = line_search_value(&z, a, &op, gamma).unwrap();
        let fb = line_search_value(&z, b, &op, gamma).unwrap();
        let bound = lipschitz_bound(&z, gamma);
        prop_assert!((fa - fb).abs() <= bound * (a - b).abs() * (1.0 + 1e-9) + 1e-14);
    }

    #[test]
    fn polar_value_scales_linearly(z in matrix(6, 5), c in 0.1..10.0f64, gamma in 0.0..5.0f64) {
        let op = SpatialOperator::build(6, 1.0, BoundaryCondition::Neumann).unwrap();
        let base = solve_polar(&z, &op, gamma, 1e-4).unwrap().value;
        let scaled = solve_polar(&(&z * c), &op, gamma, 1e-4).unwrap().value;
        prop_assert!((scaled - c * base).abs() <= 1e-6 * c * base.max(1e-12));
    }

    #[test]
    fn polar_dominates_any_sample(z in matrix(6, 4), kbar in 0.0..4.0f64, gamma in 0.0..5.0f64) {
        let op = SpatialOperator::build(6, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let best = solve_polar(&z, &op, gamma, 1e-4).unwrap().value;
        let sample = line_search_value(&z, kbar, &op, gamma).unwrap();
        prop_assert!(sample <= best * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn mode_error_ignores_permutation_and_sign(
        d in matrix(12, 4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        signs in prop::collection::vec(prop::bool::ANY, 4),
        scale in 0.1..5.0f64,
    ) {
        prop_assume!(d.column_iter().all(|c| c.norm() > 1e-3));
        let mut truth = d.clone();
        for mut c in truth.column_iter_mut() {
            c.normalize_mut();
        }
        let mut shuffled = DMatrix::zeros(12, 4);
        for (dst, &src) in perm.iter().enumerate() {
            let s = if signs[dst] { -scale } else { scale };
            shuffled.set_column(dst, &(d.column(src) * s));
        }
        prop_assert!(mode_error(&shuffled, &truth).unwrap() < 1e-9);
        let noisy = &truth + DMatrix::from_element(12, 4, 0.05);
        let e1 = mode_error(&noisy, &truth).unwrap();
        let mut reordered = DMatrix::zeros(12, 4);
        for (dst, &src) in perm.iter().enumerate() {
            reordered.set_column(dst, &(-noisy.column(src)));
        }
        let e2 = mode_error(&reordered, &truth).unwrap();
        prop_assert!((e1 - e2).abs() < 1e-9);
    }

    #[test]
    fn entropy_ignores_region_order(p in prop::collection::vec(0.0..=1.0f64, 1..20)) {
        let a = DMatrix::from_fn(p.len(), 2, |i, j| if j == 0 { p[i] } else { 1.0 - p[i] });
        let b = DMatrix::from_fn(p.len(), 2, |i, j| if j == 1 { p[i] } else { 1.0 - p[i] });
        let (ha, hb) = (mean_entropy(&a).unwrap(), mean_entropy(&b).unwrap());
        prop_assert!((ha - hb).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ha));
    }

    #[test]
    fn partition_rows_sum_to_one(
        d in matrix(15, 5),
        cut in 1usize..15,
        w in prop::collection::vec(0.0..10.0f64, 5),
        top in 1usize..=5,
    ) {
        prop_assume!(d.column_iter().all(|c| c.norm() > 1e-6));
        let p = Partition::from_cuts(15, &[cut]).unwrap();
        let e = partition_energy(&d, &p, top, &w).unwrap();
        prop_assert_eq!(e.nrows(), top);
        for r in e.row_iter() {
            prop_assert!((r.sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn svt_satisfies_subgradient_bound(y in matrix(8, 6), frac in 0.05..1.5f64) {
        let lambda = frac * spectral_norm(&y).max(1e-6);
        let shrunk = svt_oracle(&y, lambda);
        prop_assert!(spectral_norm(&(&y - &shrunk)) <= lambda + 1e-8);
    }

    #[test]
    fn objective_invariant_under_column_permutation(
        d in matrix(5, 3),
        x in matrix(4, 3),
        k in prop::collection::vec(0.0..2.0f64, 3),
        y in matrix(5, 4),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let op = SpatialOperator::build(5, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let field = WaveField::new(y, 1.0, 1.0).unwrap();
        let model = FactorModel::new(d.clone(), x.clone(), DVector::from_vec(k.clone()), 0.5, 0.8).unwrap();
        let permuted = FactorModel::new(
            d.select_columns(&perm),
            x.select_columns(&perm),
            DVector::from_iterator(3, perm.iter().map(|&j| k[j])),
            0.5,
            0.8,
        )
        .unwrap();
        let a = objective_value(&model, &field, &op).unwrap();
        let b = objective_value(&permuted, &field, &op).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fit_certifies_and_descends(y in matrix(8, 10), gamma in 0.0..3.0f64, frac in 0.1..0.9f64) {
        let op = SpatialOperator::build(8, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let lambda = frac * spectral_norm(&y).max(1e-6);
        let field = WaveField::new(y, 1.0, 1.0).unwrap();
        let cfg = SolverConfig::new(gamma, lambda);
        let (_, trace) = fit(&field, &op, &cfg).unwrap();
        prop_assert!(trace.final_polar <= 1.0 + cfg.polar_tol);
        for w in trace.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0));
        }
    }
}
