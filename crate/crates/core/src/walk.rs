//! Simple symmetric random walk on the torus: excursion supports and
//! empirical hitting probabilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{below, tag, KeyedRng, StreamKey};
use crate::torus::{Site, SiteSet, TorusGeometry};

pub const DEFAULT_WALK_CAP: u64 = 1_000_000_000;

/// Sites visited by an excursion from `origin` before its first return.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSupport {
    pub origin: Site,
    pub visited: SiteSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpsilonEstimate {
    pub d: u32,
    pub r: u32,
    pub n: u32,
    pub samples: u64,
    pub hits: u64,
    pub point_estimate: f64,
    pub std_error: f64,
}

impl UpsilonEstimate {
    fn from_counts(d: u32, r: u32, n: u32, samples: u64, hits: u64) -> Self {
        let p = hits as f64 / samples as f64;
        UpsilonEstimate {
            d,
            r,
            n,
            samples,
            hits,
            point_estimate: p,
            std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        }
    }
}

fn check_walkable(g: &TorusGeometry) -> Result<()> {
    if g.n() < 2 {
        return Err(Error::domain("a walk on a torus with n = 1 cannot move"));
    }
    Ok(())
}

/// Runs one excursion from `x` until the walk first returns to `x`.
///
/// `visit` is called with every position strictly between the start and the
/// return, in order and with repetitions. Returns the number of steps taken,
/// including the final step back to `x`.
pub fn walk_excursion(
    g: &TorusGeometry,
    x: Site,
    rng: &mut KeyedRng,
    cap: u64,
    mut visit: impl FnMut(Site),
) -> Result<u64> {
    g.check(x)?;
    check_walkable(g)?;
    let dirs = g.directions();
    let mut pos = x;
    let mut steps = 0u64;
    loop {
        if steps >= cap {
            return Err(Error::WalkBudget {
                origin: x,
                steps,
                visited: 0,
            });
        }
        pos = g.neighbour(pos, below(rng.next_word(), dirs));
        steps += 1;
        if pos == x {
            return Ok(steps);
        }
        visit(pos);
    }
}

/// Support of one excursion from `x`, including `x` itself.
pub fn sample_loop(
    g: &TorusGeometry,
    x: Site,
    rng: &mut KeyedRng,
    cap: u64,
) -> Result<LoopSupport> {
    let mut visited = SiteSet::new(g.volume());
    let res = walk_excursion(g, x, rng, cap, |y| {
        visited.insert(y);
    });
    visited.insert(x);
    match res {
        Ok(_) => Ok(LoopSupport { origin: x, visited }),
        Err(Error::WalkBudget { origin, steps, .. }) => Err(Error::WalkBudget {
            origin,
            steps,
            visited: visited.len(),
        }),
        Err(e) => Err(e),
    }
}

/// One trial of `T_y < T_x^+` for the walk started at `x`.
pub fn hits_before_return(
    g: &TorusGeometry,
    x: Site,
    y: Site,
    rng: &mut KeyedRng,
    cap: u64,
) -> Result<bool> {
    check_walkable(g)?;
    if x == y {
        return Err(Error::domain("hitting target must differ from the start"));
    }
    let dirs = g.directions();
    let mut pos = x;
    for _ in 0..cap {
        pos = g.neighbour(pos, below(rng.next_word(), dirs));
        if pos == y {
            return Ok(true);
        }
        if pos == x {
            return Ok(false);
        }
    }
    Err(Error::WalkBudget {
        origin: x,
        steps: cap,
        visited: 0,
    })
}

const SHARD: u64 = 4096;

/// Monte Carlo estimate of `P_x(T_y < T_x^+)` for a pair at distance `r`
/// along the first axis of `Z_n^d`. Samples are sharded in fixed-size
/// blocks, so the result does not depend on the worker count.
pub fn estimate_upsilon(
    d: u32,
    r: u32,
    n: u32,
    samples: u64,
    seed: u64,
) -> Result<UpsilonEstimate> {
    estimate_upsilon_capped(d, r, n, samples, seed, DEFAULT_WALK_CAP)
}

pub fn estimate_upsilon_capped(
    d: u32,
    r: u32,
    n: u32,
    samples: u64,
    seed: u64,
    cap: u64,
) -> Result<UpsilonEstimate> {
    let g = TorusGeometry::new(n, d)?;
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    if r == 0 || r > n / 2 {
        return Err(Error::domain(format!(
            "no pair at distance {r} on a torus of side {n}"
        )));
    }
    let x = Site(0);
    let mut coords = vec![0i64; d as usize];
    coords[0] = r as i64;
    let y = g.site_at(&coords)?;
    let key = StreamKey::new(seed).child(tag::SAMPLE);
    let shards = samples.div_ceil(SHARD);
    let hits = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = key.child(s).rng();
            let count = SHARD.min(samples - s * SHARD);
            let mut hits = 0u64;
            for _ in 0..count {
                hits += hits_before_return(&g, x, y, &mut rng, cap)? as u64;
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(UpsilonEstimate::from_counts(d, r, n, samples, hits))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpsilonFit {
    pub k_hat: f64,
    pub estimates: Vec<UpsilonEstimate>,
}

/// `min_r p(r) ln r` over already computed estimates.
pub fn k_hat_from(estimates: &[(u32, f64)]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::domain("no radii given"));
    }
    if let Some((r, _)) = estimates.iter().find(|(r, _)| *r < 2) {
        return Err(Error::domain(format!("radius {r} < 2 gives ln r <= 0")));
    }
    Ok(estimates
        .iter()
        .map(|&(r, p)| p * (r as f64).ln())
        .fold(f64::INFINITY, f64::min))
}

/// Empirical stand-in for the constant in `Υ_2(r) >= K / ln r`.
pub fn fit_upsilon_constant(radii: &[u32], n: u32, samples: u64, seed: u64) -> Result<UpsilonFit> {
    let estimates = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| estimate_upsilon(2, r, n, samples, StreamKey::new(seed).at(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(u32, f64)> = estimates.iter().map(|e| (e.r, e.point_estimate)).collect();
    Ok(UpsilonFit {
        k_hat: k_hat_from(&pairs)?,
        estimates,
    })
}

/// Exact hitting probability on the cycle `Z_n`: gambler's ruin on both
/// arcs gives `(1/2)(1/r + 1/(n-r))`.
pub fn upsilon_cycle_exact(n: u32, r: u32) -> f64 {
    0.5 * (1.0 / r as f64 + 1.0 / (n - r) as f64)
}
