//! Property-based checks of the lifts and the p-variation engine.

use approx::assert_relative_eq;
use proptest::prelude::*;
use roughwalk::tensor_path::{
    chen_defect, interpolation_gap, ito_lift_jump, ito_lift_sampled, strato_lift_linear, Interpretation, JumpPath,
    SampledPath,
};
use roughwalk::variation::{
    pvar_bruteforce, pvar_control_table, pvar_dyadic_lower, pvar_grid_dp, pvar_grid_dp_unpruned, pvar_path,
};
use roughwalk::Matrix;

fn points(min: usize, max: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=3, min..=max).prop_flat_map(|(dim, n)| (Just(dim), prop::collection::vec(-4.0f64..4.0, dim * n)))
}

fn sampled(dim: usize, values: Vec<f64>, interpretation: Interpretation) -> SampledPath {
    let n = values.len() / dim;
    let times = (0..n).map(|k| k as f64).collect();
    SampledPath::from_flat(dim, times, values, interpretation).unwrap()
}

fn jump_path() -> impl Strategy<Value = JumpPath> {
    (1usize..=3, 1usize..=25).prop_flat_map(|(dim, jumps)| {
        (
            prop::collection::vec(-1.0f64..1.0, dim),
            prop::collection::btree_set(1u32..10_000, jumps),
            prop::collection::vec(-2.0f64..2.0, dim * jumps),
        )
            .prop_map(move |(start, times, incr)| {
                let times: Vec<f64> = times.into_iter().map(|t| t as f64 / 10_000.0).collect();
                let incr = incr[..dim * times.len()].to_vec();
                JumpPath::from_flat(start, times, incr, 1.0).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dp_matches_brute_force((dim, values) in points(1, 9), p in 1.0f64..4.0) {
        let dp = pvar_grid_dp(&values, dim, p).unwrap();
        let bf = pvar_bruteforce(&values, dim, p).unwrap();
        prop_assert_eq!(dp.value, bf.value);
    }

    #[test]
    fn pruning_preserves_the_optimum((dim, values) in points(1, 60), p in 1.0f64..4.0) {
        let pruned = pvar_grid_dp(&values, dim, p).unwrap();
        let plain = pvar_grid_dp_unpruned(&values, dim, p).unwrap();
        prop_assert_eq!(pruned.value, plain.value);
    }

    #[test]
    fn pvar_decreases_in_p((dim, values) in points(1, 30), p in 1.0f64..3.0, dp in 0.0f64..2.0) {
        let a = pvar_grid_dp(&values, dim, p).unwrap().value;
        let b = pvar_grid_dp(&values, dim, p + dp).unwrap().value;
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn pvar_is_homogeneous((dim, values) in points(1, 20), p in 1.0f64..3.0, c in -3.0f64..3.0) {
        prop_assume!(c.abs() > 1e-3);
        let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
        let a = pvar_grid_dp(&values, dim, p).unwrap().value;
        let b = pvar_grid_dp(&scaled, dim, p).unwrap().value;
        assert_relative_eq!(b, c.abs() * a, max_relative = 1e-12, epsilon = 1e-12);
    }

    #[test]
    fn pvar_power_is_superadditive((dim, values) in points(1, 15), p in 1.0f64..3.0) {
        let c = pvar_control_table(&values, dim, p).unwrap();
        let n = c.len();
        for i in 0..n {
            for k in i..n {
                for j in k..n {
                    prop_assert!(c[i][k] + c[k][j] <= c[i][j] * (1.0 + 1e-12) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn chen_relation_holds(path in jump_path()) {
        for lift in [ito_lift_jump(&path), strato_lift_linear(&path.linear_interpolation())] {
            let t = lift.times();
            let n = t.len();
            for (i, j, k) in [(0, n / 3, n - 1), (0, 0, n - 1), (n / 2, n / 2, n - 1), (0, n - 1, n - 1)] {
                let defect = chen_defect(&lift, t[i], t[j], t[k]).unwrap().frobenius_norm();
                let scale = 1.0 + lift.area_norm(i, k) + lift.area_norm(i, j) + lift.area_norm(j, k);
                prop_assert!(defect <= 1e-12 * scale, "defect {}", defect);
            }
        }
    }

    #[test]
    fn interpolation_gap_is_half_squared_jumps(path in jump_path()) {
        let ito = ito_lift_jump(&path);
        let strato = strato_lift_linear(&path.linear_interpolation());
        let gap = interpolation_gap(&path);
        let total = &strato.total() - &ito.total();
        let (_, last) = gap.last().unwrap();
        let mut expected = Matrix::zeros(path.dim(), path.dim());
        for k in 0..path.num_jumps() {
            let dx = path.increment(k);
            expected = &expected + &Matrix::outer(dx, dx).scale(0.5);
        }
        prop_assert!((&total - last).max_abs() <= 1e-12 * (1.0 + expected.max_abs()));
        prop_assert!((last - &expected).max_abs() <= 1e-12 * (1.0 + expected.max_abs()));
    }

    #[test]
    fn stratonovich_lift_is_geometric((dim, values) in points(1, 30)) {
        let lift = strato_lift_linear(&sampled(dim, values, Interpretation::PiecewiseLinear));
        let x = lift.total_increment();
        let sym = lift.total().symmetric_part();
        let half = Matrix::outer(&x, &x).scale(0.5);
        prop_assert!((&sym - &half).max_abs() <= 1e-12 * (1.0 + half.max_abs()));
    }

    #[test]
    fn ito_lift_misses_half_the_bracket((dim, values) in points(1, 30)) {
        let path = sampled(dim, values, Interpretation::GridSamples);
        let ito = ito_lift_sampled(&path);
        let strato = strato_lift_linear(&path.clone().with_interpretation(Interpretation::PiecewiseLinear));
        let mut bracket = Matrix::zeros(dim, dim);
        for k in 1..path.len() {
            let d: Vec<f64> = path.value(k).iter().zip(path.value(k - 1)).map(|(a, b)| a - b).collect();
            bracket = &bracket + &Matrix::outer(&d, &d).scale(0.5);
        }
        let gap = &strato.total() - &ito.total();
        prop_assert!((&gap - &bracket).max_abs() <= 1e-12 * (1.0 + bracket.max_abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dyadic_skeleton_bounds_from_below((dim, values) in points(2, 12), p in 1.0f64..3.0, level in 2u32..8) {
        let path = sampled(dim, values, Interpretation::PiecewiseLinear);
        let exact = pvar_path(&path, p).unwrap().value;
        let lower = pvar_dyadic_lower(&path, level, p).unwrap().value;
        prop_assert!(lower <= exact * (1.0 + 1e-12) + 1e-12, "{} > {}", lower, exact);
    }
}

#[test]
fn zigzag_oracle() {
    let values = [0.0, 1.0, 0.0];
    for p in [1.0, 2.0, 3.0] {
        let r = pvar_bruteforce(&values, 1, p).unwrap();
        assert_relative_eq!(r.value, 2f64.powf(1.0 / p), max_relative = 1e-15);
        assert_eq!(r.optimal_partition, vec![0, 1, 2]);
    }
}
