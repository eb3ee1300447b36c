use proptest::prelude::*;

use arw_core::arw::{
    check_abelian, random_configuration, stabilize_reference, OrderPolicy, ReferenceArwState,
};
use arw_core::torus::{Site, SiteSet, TorusGeometry};
use arw_core::Error;

const BUDGET: u64 = 50_000_000;

/// Subcritical instances: at most 36% of the torus is occupied and `λ ≥ 1`,
/// so every run settles quickly.
fn instance() -> impl Strategy<Value = (u32, u32, f64, u64, Vec<bool>, f64)> {
    (3u32..7, 1u32..3).prop_flat_map(|(n, d)| {
        let v = n.pow(d) as usize;
        (
            Just(n),
            Just(d),
            1.0f64..5.0,
            any::<u64>(),
            prop::collection::vec(prop::bool::weighted(0.6), v),
            0.0f64..0.6,
        )
    })
}

fn build(
    n: u32,
    d: u32,
    lambda: f64,
    seed: u64,
    mask: &[bool],
    density: f64,
) -> Option<ReferenceArwState> {
    let g = TorusGeometry::new(n, d).unwrap();
    let a = SiteSet::from_sites(g.volume(), g.sites().filter(|x| mask[x.index()]));
    if a.is_empty() {
        return None;
    }
    let k = (density * a.len() as f64).floor() as usize;
    let counts = random_configuration(&a, k, seed).unwrap();
    Some(ReferenceArwState::new(g, a, lambda, seed, counts).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stabilization_conserves_particles_and_is_stable((n, d, l, seed, mask, rho) in instance()) {
        let Some(mut s) = build(n, d, l, seed, &mask, rho) else { return Ok(()) };
        let before = s.particle_count();
        let out = stabilize_reference(&mut s, &OrderPolicy::Fifo, BUDGET).unwrap();
        prop_assert_eq!(s.particle_count(), before);
        prop_assert_eq!(s.active_sites().count(), 0);
        for x in s.geometry().sites() {
            let c = s.counts()[x.index()];
            if c > 0 {
                prop_assert!(s.settling_set().contains(x));
                prop_assert_eq!(c, 1);
                prop_assert!(s.asleep()[x.index()]);
            }
        }
        let on_a: u64 = s.settling_set().iter().map(|x| s.odometer()[x.index()]).sum();
        prop_assert_eq!(out.m_a, on_a);
        prop_assert_eq!(out.total_topplings, s.odometer().iter().sum::<u64>());
    }

    #[test]
    fn final_state_does_not_depend_on_the_order((n, d, l, seed, mask, rho) in instance()) {
        let Some(s) = build(n, d, l, seed, &mask, rho) else { return Ok(()) };
        let report = check_abelian(&s, 6, seed ^ 1, BUDGET).unwrap();
        prop_assert!(report.identical, "{:?}", report.mismatches.first());
    }

    #[test]
    fn an_extra_particle_only_raises_the_odometer((n, d, l, seed, mask, rho) in instance(), at in any::<prop::sample::Index>()) {
        let Some(base) = build(n, d, l, seed, &mask, rho * 0.8) else { return Ok(()) };
        let a = base.settling_set().to_vec();
        let x = a[at.index(a.len())];
        let mut more = base.clone();
        more.add_particle(x).unwrap();
        let mut base = base;
        stabilize_reference(&mut base, &OrderPolicy::LowestIndex, BUDGET).unwrap();
        stabilize_reference(&mut more, &OrderPolicy::LowestIndex, BUDGET).unwrap();
        for (lo, hi) in base.odometer().iter().zip(more.odometer()) {
            prop_assert!(lo <= hi);
        }
    }
}

#[test]
fn toppling_an_inactive_site_is_refused() {
    let g = TorusGeometry::new(4, 1).unwrap();
    let a = SiteSet::full(4);
    let mut s = ReferenceArwState::new(g, a, 1.0, 0, vec![1, 0, 0, 0]).unwrap();
    assert!(matches!(
        s.topple(Site(1)),
        Err(Error::IllegalToppling(Site(1)))
    ));
}

#[test]
fn more_particles_than_sites_cannot_settle() {
    let g = TorusGeometry::new(3, 1).unwrap();
    let a = SiteSet::full(3);
    let mut s = ReferenceArwState::new(g, a, 1.0, 7, vec![2, 1, 1]).unwrap();
    let err = stabilize_reference(&mut s, &OrderPolicy::Fifo, 10_000).unwrap_err();
    assert!(matches!(err, Error::ReferenceBudget { .. }));
}

#[test]
fn same_seed_same_history() {
    let g = TorusGeometry::new(6, 2).unwrap();
    let a = SiteSet::from_sites(36, (0..30).map(Site));
    let go = |seed| {
        let counts = random_configuration(&a, 15, 5).unwrap();
        let mut s = ReferenceArwState::new(g.clone(), a.clone(), 0.7, seed, counts).unwrap();
        stabilize_reference(&mut s, &OrderPolicy::Random { seed: 3 }, BUDGET).unwrap();
        s.odometer().to_vec()
    };
    assert_eq!(go(11), go(11));
    assert_ne!(go(11), go(12));
}
