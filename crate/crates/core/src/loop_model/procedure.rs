//! Level-0 toppling procedures: which active site of a cluster to topple
//! next, looking only at the current configuration inside the cluster.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::hierarchy::Cluster;
use crate::torus::{Site, SiteSet, TorusGeometry};

/// What a procedure may look at.
pub struct ClusterView<'a> {
    pub geometry: &'a TorusGeometry,
    pub cluster: &'a Cluster,
    pub active: &'a SiteSet,
    /// `|R ∩ C|`, always positive when a procedure is consulted.
    pub active_count: usize,
}

impl ClusterView<'_> {
    pub fn active_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.cluster
            .sites
            .iter()
            .copied()
            .filter(|&x| self.active.contains(x))
    }
}

/// A rule `f` with `f(R) ∈ R ∩ C` that returns `x*_C` whenever it is active.
/// The engine checks both properties on every call.
pub trait TopplingProcedure {
    fn select(&mut self, view: &ClusterView<'_>) -> Site;
}

impl<T: TopplingProcedure + ?Sized> TopplingProcedure for &mut T {
    fn select(&mut self, view: &ClusterView<'_>) -> Site {
        (**self).select(view)
    }
}

/// Distinguished vertex first, then the active site of smallest index.
#[derive(Clone, Copy, Debug, Default)]
pub struct LowestIndex;

impl TopplingProcedure for LowestIndex {
    fn select(&mut self, view: &ClusterView<'_>) -> Site {
        let xs = view.cluster.distinguished;
        if view.active.contains(xs) {
            return xs;
        }
        view.active_sites()
            .next()
            .expect("procedure called on a stable cluster")
    }
}

/// Distinguished vertex first; once at most a fraction `beta` of the
/// cluster is active, an active site with at least `(1 - beta) v` sleepers
/// within distance `16 r`.
#[derive(Clone, Copy, Debug)]
pub struct NearbySleepers {
    /// `None` stands for `r = ∞`.
    pub r: Option<u32>,
    pub v: u64,
    pub beta: f64,
}

impl TopplingProcedure for NearbySleepers {
    fn select(&mut self, view: &ClusterView<'_>) -> Site {
        select_topple_site(
            view.geometry,
            &view.cluster.sites,
            view.active,
            self.r,
            self.v,
            self.beta,
            view.cluster.distinguished,
        )
        .expect("procedure called on a stable cluster")
    }
}

const EPS: f64 = 1e-9;

fn radius(g: &TorusGeometry, r: Option<u32>, factor: u32) -> u32 {
    match r {
        Some(r) => r.saturating_mul(factor),
        None => g.n(),
    }
}

/// `|(C \ R) ∩ B(x, radius)|`.
pub fn sleepers_near(
    g: &TorusGeometry,
    sites: &[Site],
    active: &SiteSet,
    x: Site,
    radius: u32,
) -> usize {
    sites
        .iter()
        .filter(|&&y| !active.contains(y) && g.dist(x, y) <= radius)
        .count()
}

/// The sleeper threshold `(1 - beta) v`.
pub fn sleeper_target(v: u64, beta: f64) -> f64 {
    (1.0 - beta) * v as f64
}

/// Chooses the next site of `sites` (a level-0 cluster) to topple.
pub fn select_topple_site(
    g: &TorusGeometry,
    sites: &[Site],
    active: &SiteSet,
    r: Option<u32>,
    v: u64,
    beta: f64,
    distinguished: Site,
) -> Result<Site> {
    let count = sites.iter().filter(|&&x| active.contains(x)).count();
    if count == 0 {
        return Err(Error::domain("no active site in the cluster"));
    }
    if active.contains(distinguished) && sites.binary_search(&distinguished).is_ok() {
        return Ok(distinguished);
    }
    let lowest = *sites
        .iter()
        .find(|&&x| active.contains(x))
        .expect("count > 0");
    if count as f64 > beta * sites.len() as f64 + EPS {
        return Ok(lowest);
    }
    let need = sleeper_target(v, beta) - EPS;
    let r16 = radius(g, r, 16);
    if let Some(x) = constructive_choice(g, sites, active, r, need) {
        return Ok(x);
    }
    if let Some(&x) = sites
        .iter()
        .find(|&&x| active.contains(x) && sleepers_near(g, sites, active, x, r16) as f64 >= need)
    {
        return Ok(x);
    }
    Ok(lowest)
}

/// Maximal `8r`-separated net, a net point with many sleepers within `8r`,
/// then a path through sleepers to the first point that sees an active site
/// within `4r`.
fn constructive_choice(
    g: &TorusGeometry,
    sites: &[Site],
    active: &SiteSet,
    r: Option<u32>,
    need: f64,
) -> Option<Site> {
    let (r4, r8) = (radius(g, r, 4), radius(g, r, 8));
    let mut net: Vec<Site> = Vec::new();
    for &s in sites {
        if net.iter().all(|&y| g.dist(s, y) > r8) {
            net.push(s);
        }
    }
    let y = *net
        .iter()
        .find(|&&y| sleepers_near(g, sites, active, y, r8) as f64 >= need)?;
    if active.contains(y) {
        return Some(y);
    }
    // BFS from y through sleeping sites with steps of length at most 8r.
    let index = |x: Site| sites.binary_search(&x).ok();
    let start = index(y)?;
    let mut parent = vec![usize::MAX; sites.len()];
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    let mut end = None;
    'bfs: while let Some(u) = queue.pop_front() {
        for (w, &s) in sites.iter().enumerate() {
            if parent[w] == usize::MAX && g.dist(sites[u], s) <= r8 {
                parent[w] = u;
                if active.contains(s) {
                    end = Some(w);
                    break 'bfs;
                }
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![end?];
    while *path.last()? != start {
        let last = *path.last()?;
        path.push(parent[last]);
    }
    path.reverse();
    path.iter().find_map(|&p| {
        let yj = sites[p];
        sites
            .iter()
            .copied()
            .find(|&x| active.contains(x) && g.dist(x, yj) <= r4)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::ClusterOrigin;

    fn square(g: &TorusGeometry, k: i64) -> Vec<Site> {
        let mut v: Vec<Site> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| g.site_at(&[i, j]).unwrap())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn distinguished_first() {
        let g = TorusGeometry::new(10, 2).unwrap();
        let sites = square(&g, 3);
        let active = SiteSet::from_sites(100, sites.iter().copied());
        let x = select_topple_site(&g, &sites, &active, Some(1), 9, 5.0 / 6.0, sites[4]).unwrap();
        assert_eq!(x, sites[4]);
    }

    #[test]
    fn single_active_in_full_square() {
        let g = TorusGeometry::new(10, 2).unwrap();
        let sites = square(&g, 4);
        let lone = sites[9];
        let active = SiteSet::from_sites(100, [lone]);
        let x = select_topple_site(&g, &sites, &active, Some(1), 9, 5.0 / 6.0, sites[0]).unwrap();
        assert_eq!(x, lone);
        assert_eq!(sleepers_near(&g, &sites, &active, x, 16), 15);
    }

    #[test]
    fn empty_is_an_error() {
        let g = TorusGeometry::new(10, 2).unwrap();
        let sites = square(&g, 2);
        assert!(
            select_topple_site(&g, &sites, &SiteSet::new(100), Some(1), 1, 0.5, sites[0]).is_err()
        );
    }

    #[test]
    fn lowest_index_prefers_distinguished() {
        let g = TorusGeometry::new(10, 2).unwrap();
        let sites = square(&g, 2);
        let cluster = Cluster {
            sites: sites.clone(),
            distinguished: sites[3],
            origin: ClusterOrigin::Base,
        };
        let active = SiteSet::from_sites(100, [sites[1], sites[3]]);
        let view = ClusterView {
            geometry: &g,
            cluster: &cluster,
            active: &active,
            active_count: 2,
        };
        assert_eq!(LowestIndex.select(&view), sites[3]);
        let active = SiteSet::from_sites(100, [sites[2], sites[1]]);
        let view = ClusterView {
            geometry: &g,
            cluster: &cluster,
            active: &active,
            active_count: 2,
        };
        assert_eq!(LowestIndex.select(&view), sites[1]);
    }
}
