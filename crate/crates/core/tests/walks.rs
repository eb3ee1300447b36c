use proptest::prelude::*;

use arw_core::rng::StreamKey;
use arw_core::torus::{Site, TorusGeometry};
use arw_core::walk::{estimate_upsilon, sample_loop, upsilon_cycle_exact, walk_excursion};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn excursions_are_reproducible(seed in any::<u64>(), n in 2u32..8, d in 1u32..4) {
        let g = TorusGeometry::new(n, d).unwrap();
        let run = || {
            let mut path = Vec::new();
            let mut rng = StreamKey::new(seed).rng();
            let steps = walk_excursion(&g, Site(0), &mut rng, 1 << 30, |y| path.push(y)).unwrap();
            (steps, path)
        };
        let (steps, path) = run();
        prop_assert_eq!(&(steps, path.clone()), &run());
        prop_assert_eq!(path.len() as u64, steps - 1);
        prop_assert!(!path.contains(&Site(0)));
        let mut rng = StreamKey::new(seed).rng();
        let support = sample_loop(&g, Site(0), &mut rng, 1 << 30).unwrap();
        prop_assert!(support.visited.contains(Site(0)));
        prop_assert!(path.iter().all(|&y| support.visited.contains(y)));
    }

    #[test]
    fn consecutive_positions_are_neighbours(seed in any::<u64>()) {
        let g = TorusGeometry::new(5, 2).unwrap();
        let mut prev = Site(7);
        let mut rng = StreamKey::new(seed).rng();
        walk_excursion(&g, Site(7), &mut rng, 1 << 30, |y| {
            assert_eq!(g.dist(prev, y), 1);
            prev = y;
        }).unwrap();
        prop_assert_eq!(g.dist(prev, Site(7)), 1);
    }
}

#[test]
fn cycle_hitting_probabilities_match_gamblers_ruin() {
    assert!((upsilon_cycle_exact(3, 1) - 0.75).abs() < 1e-15);
    for (k, (n, r)) in [(3u32, 1u32), (8, 2), (10, 5), (12, 3)]
        .into_iter()
        .enumerate()
    {
        let e = estimate_upsilon(1, r, n, 200_000, k as u64).unwrap();
        let exact = upsilon_cycle_exact(n, r);
        assert!(
            (e.point_estimate - exact).abs() < 5.0 * e.std_error,
            "n={n} r={r}: {} vs {exact}",
            e.point_estimate
        );
    }
}

#[test]
fn mean_return_time_is_the_volume() {
    // Kac's formula for the uniform stationary law.
    let g = TorusGeometry::new(5, 2).unwrap();
    let mut rng = StreamKey::new(99).rng();
    let runs = 100_000;
    let times: Vec<f64> = (0..runs)
        .map(|_| walk_excursion(&g, Site(3), &mut rng, 1 << 30, |_| {}).unwrap() as f64)
        .collect();
    let mean = times.iter().sum::<f64>() / runs as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let se = (var / runs as f64).sqrt();
    assert!((mean - 25.0).abs() < 5.0 * se, "mean {mean} ± {se}");
}

#[test]
fn upsilon_estimate_ignores_the_thread_count() {
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let two = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let a = one.install(|| estimate_upsilon(2, 3, 10, 50_000, 4).unwrap());
    let b = two.install(|| estimate_upsilon(2, 3, 10, 50_000, 4).unwrap());
    assert_eq!(a, b);
}

#[test]
fn walk_cap_is_reported() {
    let g = TorusGeometry::new(50, 2).unwrap();
    let mut rng = StreamKey::new(1).rng();
    let mut hit_cap = false;
    for _ in 0..200 {
        if walk_excursion(&g, Site(0), &mut rng, 3, |_| {}).is_err() {
            hit_cap = true;
            break;
        }
    }
    assert!(hit_cap);
    assert!(estimate_upsilon(2, 1, 1, 10, 0).is_err());
}
