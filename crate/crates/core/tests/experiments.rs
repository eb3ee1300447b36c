use proptest::prelude::*;

use arw_core::experiments::{
    activity_sweep, dominance_test, metastability_alpha, metastability_condition,
    sum_geometrics_parameter, verify_sum_geometrics,
};
use arw_core::rng::StreamKey;
use arw_core::stats::sample_geometric;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn compound_geometric_is_geometric(a in 0.05f64..1.0, b in 0.05f64..1.0, seed in any::<u64>()) {
        let r = verify_sum_geometrics(a, b, 20_000, seed).unwrap();
        prop_assert!((r.parameter - sum_geometrics_parameter(a, b)).abs() < 1e-15);
        // Loose enough to essentially never fail at 20k samples.
        prop_assert!(r.ks.distance < 0.025, "{r:?}");
    }

    #[test]
    fn metastability_root_satisfies_the_condition(lambda in 0.5f64..20.0, ups in 0.05f64..0.5, v in 4.0f64..64.0) {
        let beta = 5.0 / 6.0;
        let alpha = metastability_alpha(lambda, beta, v, ups);
        prop_assert!(alpha >= 0.0);
        prop_assert!(metastability_condition(lambda, alpha, beta, v, ups) >= -1e-9);
        if alpha > 0.0 {
            prop_assert!(metastability_condition(lambda, alpha * 1.01 + 1e-9, beta, v, ups) < 1e-9);
        } else {
            prop_assert!(ups * ((1.0 - beta) * v - 1.0) <= lambda + 1e-12);
        }
    }
}

#[test]
fn dominance_accepts_the_law_itself_and_rejects_a_heavier_one() {
    let mut rng = StreamKey::new(8).rng();
    let exact: Vec<u64> = (0..20_000)
        .map(|_| sample_geometric(0.3, &mut rng).unwrap())
        .collect();
    assert!(dominance_test(&exact, 0.3, 0.99).unwrap().pass);
    // Geom(0.3) is stochastically smaller than Geom(0.2).
    assert!(!dominance_test(&exact, 0.2, 0.99).unwrap().pass);
    assert!(dominance_test(&exact, 0.5, 0.99).unwrap().pass);
}

#[test]
fn sweep_is_reproducible_and_grows_with_density() {
    let grid = [0.05, 0.9];
    let a = activity_sweep(2, 6, 0.2, &grid, 6, 200_000, 3).unwrap();
    let b = activity_sweep(2, 6, 0.2, &grid, 6, 200_000, 3).unwrap();
    assert_eq!(a.runs, b.runs);
    assert!(a.cells[0].exceed_rate.mean <= a.cells[1].exceed_rate.mean);
}
