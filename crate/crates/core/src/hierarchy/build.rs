//! Hierarchy builders.

use super::{larger_first, pair_2_or_3, scale_d, Cluster, ClusterOrigin, DormitoryHierarchy};
use crate::error::{Error, Result};
use crate::torus::{Site, SiteSet, TorusGeometry};

struct Work {
    sites: Vec<Site>,
    distinguished: Site,
    diam: u32,
}

fn union_diameter(g: &TorusGeometry, a: &Work, b: &Work) -> u32 {
    let mut best = a.diam.max(b.diam);
    let half = g.n() / 2;
    for &x in &a.sites {
        for &y in &b.sites {
            best = best.max(g.dist(x, y));
            if best == half {
                return best;
            }
        }
    }
    best
}

fn merged(g: &TorusGeometry, a: &Work, b: &Work) -> Work {
    let big = if (a.sites.len(), std::cmp::Reverse(a.sites[0]))
        >= (b.sites.len(), std::cmp::Reverse(b.sites[0]))
    {
        a
    } else {
        b
    };
    let mut sites = a.sites.clone();
    sites.extend_from_slice(&b.sites);
    sites.sort_unstable();
    Work {
        distinguished: big.distinguished,
        diam: union_diameter(g, a, b),
        sites,
    }
}

enum Plan {
    Keep(usize),
    Pair(usize, usize),
    // first two merge one level before the third joins
    Triple(usize, usize, usize),
}

/// Completes `(A_0, C_0)` into a hierarchy with `D_j = 6^j D_0`, two levels
/// per step: wide clusters and big isolated ones are kept, mergeable ones
/// are grouped in pairs or triples, and the rest is discarded.
pub fn build_generic(
    g: &TorusGeometry,
    a: &SiteSet,
    a0: &SiteSet,
    c0: Vec<Vec<Site>>,
    v: u64,
    d0: u64,
) -> Result<DormitoryHierarchy> {
    if v == 0 || d0 == 0 {
        return Err(Error::domain("v and D_0 must be at least 1"));
    }
    if !a0.is_subset(a) {
        return Err(Error::domain("A_0 is not a subset of A"));
    }
    let need = 8.0 * v as f64 * (6.0 * g.n() as f64 / d0 as f64).powi(g.d() as i32);
    if (a0.len() as f64) < need {
        return Err(Error::domain(format!(
            "|A_0| = {} is below 8v(6n/D_0)^d = {need:.3}",
            a0.len()
        )));
    }
    let radius = d0 / (12 * v);
    let mut cover = SiteSet::new(g.volume());
    let mut work = Vec::with_capacity(c0.len());
    for mut sites in c0 {
        sites.sort_unstable();
        if sites.is_empty() {
            return Err(Error::domain("empty level-0 cluster"));
        }
        if (sites.len() as u64) < v {
            return Err(Error::domain(format!(
                "level-0 cluster of size {} < v = {v}",
                sites.len()
            )));
        }
        for &x in &sites {
            g.check(x)?;
            if !cover.insert(x) {
                return Err(Error::domain(format!(
                    "site {} in two level-0 clusters",
                    x.0
                )));
            }
        }
        let connected = if radius == 0 {
            sites.len() == 1
        } else {
            g.r_components_of(&sites, radius.min(u32::MAX as u64) as u32)
                .len()
                == 1
        };
        if !connected {
            return Err(Error::domain(format!(
                "level-0 cluster starting at {} is not {radius}-connected",
                sites[0].0
            )));
        }
        let diam = g.diameter_of(&sites)?;
        work.push(Work {
            distinguished: sites[0],
            diam,
            sites,
        });
    }
    if cover != *a0 {
        return Err(Error::domain("level-0 clusters do not partition A_0"));
    }
    work.sort_by_key(|w| w.sites[0]);

    let mut levels: Vec<Vec<Cluster>> = vec![work
        .iter()
        .map(|w| Cluster {
            sites: w.sites.clone(),
            distinguished: w.distinguished,
            origin: ClusterOrigin::Base,
        })
        .collect()];
    let half = (g.n() / 2) as u64;
    let mut step = 0usize;
    while work.len() > 1 {
        let dd = scale_d(d0, 2 * step);
        let narrow: Vec<bool> = work.iter().map(|w| 6 * w.diam as u64 <= dd).collect();
        let k = work.len();
        let trivially_close = dd / 2 >= half;
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); k];
        let mut pair_diam = std::collections::HashMap::new();
        for i in 0..k {
            if !narrow[i] {
                continue;
            }
            for jj in i + 1..k {
                if !narrow[jj] {
                    continue;
                }
                let ud = if trivially_close {
                    0
                } else {
                    union_diameter(g, &work[i], &work[jj])
                };
                if trivially_close || 2 * ud as u64 <= dd {
                    adjacency[i].push(jj);
                    adjacency[jj].push(i);
                    pair_diam.insert((i, jj), ud);
                }
            }
        }
        let big = (1u64 << (step + 1).min(63)).saturating_mul(v);
        let mut plans = Vec::new();
        let merging: Vec<usize> = (0..k).filter(|&i| !adjacency[i].is_empty()).collect();
        for i in 0..k {
            if !narrow[i] || (adjacency[i].is_empty() && work[i].sites.len() as u64 >= big) {
                plans.push(Plan::Keep(i));
            }
        }
        if !merging.is_empty() {
            let local: Vec<usize> = {
                let mut map = vec![usize::MAX; k];
                for (p, &i) in merging.iter().enumerate() {
                    map[i] = p;
                }
                map
            };
            let sub: Vec<Vec<usize>> = merging
                .iter()
                .map(|&i| adjacency[i].iter().map(|&u| local[u]).collect())
                .collect();
            for cell in pair_2_or_3(&sub)? {
                let ids: Vec<usize> = cell.iter().map(|&p| merging[p]).collect();
                match *ids.as_slice() {
                    [x, y] => plans.push(Plan::Pair(x, y)),
                    [x, y, z] => {
                        let mut diam_of = |p: usize, q: usize| -> u32 {
                            if trivially_close {
                                return 0;
                            }
                            let key = (p.min(q), p.max(q));
                            *pair_diam
                                .entry(key)
                                .or_insert_with(|| union_diameter(g, &work[key.0], &work[key.1]))
                        };
                        let options = [(x, y, z), (x, z, y), (y, z, x)];
                        let best = options
                            .iter()
                            .enumerate()
                            .min_by_key(|(idx, &(p, q, _))| (diam_of(p, q), *idx))
                            .map(|(_, &o)| o)
                            .expect("three options");
                        plans.push(Plan::Triple(best.0, best.1, best.2));
                    }
                    _ => unreachable!("pairing cells have two or three members"),
                }
            }
        }
        if plans.is_empty() {
            return Err(Error::ConstructionFailed(format!(
                "every cluster of level {} was discarded",
                2 * step
            )));
        }

        // Level 2j+1.
        let prev = levels.last().expect("level 0 exists");
        let mut mid: Vec<(Work, ClusterOrigin)> = Vec::new();
        // For each plan, where its pieces sit in the middle level.
        let mut mid_of_plan: Vec<Vec<usize>> = Vec::new();
        for plan in &plans {
            let mut slots = Vec::new();
            match *plan {
                Plan::Keep(i) => {
                    slots.push(mid.len());
                    mid.push((clone_work(&work[i]), ClusterOrigin::Kept(i)));
                }
                Plan::Pair(x, y) | Plan::Triple(x, y, _) => {
                    let (p, q) = larger_first(prev, x, y);
                    slots.push(mid.len());
                    mid.push((merged(g, &work[x], &work[y]), ClusterOrigin::Merged(p, q)));
                    if let Plan::Triple(_, _, z) = *plan {
                        slots.push(mid.len());
                        mid.push((clone_work(&work[z]), ClusterOrigin::Kept(z)));
                    }
                }
            }
            mid_of_plan.push(slots);
        }
        let (mid_level, mid_index) = sorted_level(&mid);
        let mid_work: Vec<Work> = reorder(mid, &mid_index);
        levels.push(mid_level);
        if mid_work.len() == 1 {
            break;
        }

        // Level 2j+2.
        let mut upper: Vec<(Work, ClusterOrigin)> = Vec::new();
        let mid_clusters = levels.last().expect("middle level");
        for (plan, slots) in plans.iter().zip(&mid_of_plan) {
            let slot: Vec<usize> = slots.iter().map(|&s| mid_index[s]).collect();
            match plan {
                Plan::Triple(..) => {
                    let (p, q) = larger_first(mid_clusters, slot[0], slot[1]);
                    upper.push((
                        merged(g, &mid_work[slot[0]], &mid_work[slot[1]]),
                        ClusterOrigin::Merged(p, q),
                    ));
                }
                _ => upper.push((clone_work(&mid_work[slot[0]]), ClusterOrigin::Kept(slot[0]))),
            }
        }
        let (upper_level, upper_index) = sorted_level(&upper);
        work = reorder(upper, &upper_index);
        levels.push(upper_level);
        step += 1;
    }
    DormitoryHierarchy::from_levels(g.clone(), a.clone(), v, d0, levels)
}

fn clone_work(w: &Work) -> Work {
    Work {
        sites: w.sites.clone(),
        distinguished: w.distinguished,
        diam: w.diam,
    }
}

/// Sorts clusters by smallest site; returns the level and, for each input
/// position, its index in the sorted level.
fn sorted_level(items: &[(Work, ClusterOrigin)]) -> (Vec<Cluster>, Vec<usize>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| items[i].0.sites[0]);
    let mut index = vec![0; items.len()];
    for (pos, &i) in order.iter().enumerate() {
        index[i] = pos;
    }
    let level = order
        .iter()
        .map(|&i| Cluster {
            sites: items[i].0.sites.clone(),
            distinguished: items[i].0.distinguished,
            origin: items[i].1,
        })
        .collect();
    (level, index)
}

fn reorder(items: Vec<(Work, ClusterOrigin)>, index: &[usize]) -> Vec<Work> {
    let mut out: Vec<Option<Work>> = (0..items.len()).map(|_| None).collect();
    for (i, (w, _)) in items.into_iter().enumerate() {
        out[index[i]] = Some(w);
    }
    out.into_iter().map(|w| w.expect("permutation")).collect()
}

/// Low sleep rate, `d = 2`: singletons at level 0 and `v = 1`.
pub fn build_low_lambda(g: &TorusGeometry, a: &SiteSet, d0: u64) -> Result<DormitoryHierarchy> {
    if g.d() != 2 {
        return Err(Error::domain(
            "the low sleep rate construction is for d = 2",
        ));
    }
    let n = g.n() as u128;
    if 288 * n * n > a.len() as u128 * (d0 as u128) * (d0 as u128) {
        return Err(Error::domain(format!(
            "|A| = {} is below 288 n^2 / D_0^2 = {:.3}",
            a.len(),
            288.0 * (n * n) as f64 / (d0 as f64).powi(2)
        )));
    }
    let c0 = a.iter().map(|x| vec![x]).collect();
    build_generic(g, a, a, c0, 1, d0)
}

/// `A_0` and `C_0` of the high sleep rate construction.
pub fn high_lambda_base(g: &TorusGeometry, a: &SiteSet, r: u32) -> (SiteSet, Vec<Vec<Site>>) {
    let volume = g.volume();
    let need = r as usize * r as usize;
    let mut dense = vec![false; volume];
    for y in g.sites() {
        let mut count = 0usize;
        g.for_each_in_ball(y, 2 * r, |z| count += a.contains(z) as usize);
        dense[y.index()] = count >= need;
    }
    let mut a0 = SiteSet::new(volume);
    for x in a.iter() {
        let mut ok = false;
        g.for_each_in_ball(x, 2 * r, |y| ok |= dense[y.index()]);
        if ok {
            a0.insert(x);
        }
    }
    let c0 = g.r_components(&a0, 8 * r);
    (a0, c0)
}

/// Whether `|C ∩ B(x, 4r)| >= r^2` for every `x ∈ C`.
pub fn dense_condition_holds(g: &TorusGeometry, c: &[Site], r: u32) -> bool {
    let set = SiteSet::from_sites(g.volume(), c.iter().copied());
    let need = r as usize * r as usize;
    c.iter().all(|&x| {
        let mut count = 0usize;
        g.for_each_in_ball(x, 4 * r, |y| count += set.contains(y) as usize);
        count >= need
    })
}

/// High sleep rate, `d = 2`: `D_0 = 96 r^3`, `v = r^2`, level 0 from the
/// `8r`-components of the locally dense part of `A`.
pub fn build_high_lambda(g: &TorusGeometry, a: &SiteSet, r: u32) -> Result<DormitoryHierarchy> {
    if g.d() != 2 {
        return Err(Error::domain(
            "the high sleep rate construction is for d = 2",
        ));
    }
    if r == 0 {
        return Err(Error::domain("r must be at least 1"));
    }
    let n = g.n() as u64;
    if 2 * (a.len() as u64) < n * n {
        return Err(Error::domain(format!("|A| = {} is below n^2 / 2", a.len())));
    }
    if n < 2 * r as u64 + 1 {
        return Err(Error::domain(format!("n = {n} is below 2r + 1")));
    }
    let (a0, c0) = high_lambda_base(g, a, r);
    let r64 = r as u64;
    build_generic(g, a, &a0, c0, r64 * r64, 96 * r64 * r64 * r64)
}

#[cfg(test)]
mod tests {
    use super::super::validate_hierarchy;
    use super::*;

    #[test]
    fn single_cluster_stops_immediately() {
        let g = TorusGeometry::new(10, 1).unwrap();
        let a = SiteSet::from_sites(10, [Site(3), Site(4)]);
        let h = build_generic(&g, &a, &a, vec![vec![Site(3), Site(4)]], 1, 1000).unwrap();
        assert_eq!(h.top(), 0);
        assert!(validate_hierarchy(&h).valid);
    }

    #[test]
    fn close_pair_merges_once() {
        let g = TorusGeometry::new(100, 1).unwrap();
        let a = SiteSet::from_sites(100, [Site(10), Site(12)]);
        let h = build_generic(&g, &a, &a, vec![vec![Site(10)], vec![Site(12)]], 1, 10_000).unwrap();
        assert!(h.top() == 1 || h.top() == 2);
        assert_eq!(h.level(h.top()).len(), 1);
        assert!(validate_hierarchy(&h).valid);
    }

    #[test]
    fn low_lambda_single_site() {
        let g = TorusGeometry::new(5, 2).unwrap();
        let a = SiteSet::from_sites(25, [Site(7)]);
        let h = build_low_lambda(&g, &a, 85).unwrap();
        assert_eq!(h.top(), 0);
        assert!(build_low_lambda(&g, &a, 80).is_err());
    }

    #[test]
    fn isolated_point_is_excluded() {
        let g = TorusGeometry::new(40, 2).unwrap();
        let mut a = SiteSet::new(1600);
        for x in 0..20 {
            for y in 0..40 {
                a.insert(g.site_at(&[x, y]).unwrap());
            }
        }
        let far = g.site_at(&[30, 20]).unwrap();
        a.insert(far);
        let (a0, _) = high_lambda_base(&g, &a, 2);
        assert!(!a0.contains(far));
        assert!(a0.contains(g.site_at(&[5, 5]).unwrap()));
    }

    #[test]
    fn full_torus_high_lambda() {
        let g = TorusGeometry::new(16, 2).unwrap();
        let a = SiteSet::full(256);
        let (a0, c0) = high_lambda_base(&g, &a, 2);
        assert_eq!(a0, a);
        assert_eq!(c0.len(), 1);
        let h = build_high_lambda(&g, &a, 2).unwrap();
        assert!(validate_hierarchy(&h).valid);
    }
}
