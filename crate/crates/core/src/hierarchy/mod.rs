//! Dormitory hierarchies: nested partitions `C_0, ..., C_J` of shrinking
//! subsets `A_0 ⊃ ... ⊃ A_J` of the settling set, with distinguished
//! vertices and the colour-target function `w(x, j)`.

mod build;
mod pairing;

pub use build::{
    build_generic, build_high_lambda, build_low_lambda, dense_condition_holds, high_lambda_base,
};
pub use pairing::pair_2_or_3;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{Site, SiteSet, TorusGeometry};

/// How a cluster arose from the level below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterOrigin {
    /// A level-0 cluster.
    Base,
    /// The same set as cluster `.0` of the previous level.
    Kept(usize),
    /// Union of clusters `.0` and `.1` of the previous level; the first one
    /// carries the distinguished vertex.
    Merged(usize, usize),
    /// Anything else; only produced when importing hand-made partitions and
    /// always rejected by validation.
    Irregular,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Ascending.
    pub sites: Vec<Site>,
    pub distinguished: Site,
    pub origin: ClusterOrigin,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn min_site(&self) -> Site {
        self.sites[0]
    }
}

const NO_CLUSTER: u32 = u32::MAX;

#[derive(Serialize, Deserialize)]
struct HierarchyRepr {
    geometry: TorusGeometry,
    settling_set: SiteSet,
    v: u64,
    d0: u64,
    levels: Vec<Vec<Cluster>>,
}

/// A candidate `(v, D)`-dormitory hierarchy with `D_j = 6^j D_0`.
///
/// Construction never rejects a structurally odd hierarchy; use
/// [`validate_hierarchy`] to check the defining conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HierarchyRepr", into = "HierarchyRepr")]
pub struct DormitoryHierarchy {
    geometry: TorusGeometry,
    a: SiteSet,
    v: u64,
    d0: u64,
    levels: Vec<Vec<Cluster>>,
    // membership[j][x] is the index of C_j(x), or NO_CLUSTER
    membership: Vec<Vec<u32>>,
    // highest level at which x is distinguished along an unbroken run from level 0
    distinguished_top: Vec<i32>,
}

impl TryFrom<HierarchyRepr> for DormitoryHierarchy {
    type Error = Error;
    fn try_from(r: HierarchyRepr) -> Result<Self> {
        DormitoryHierarchy::from_levels(r.geometry, r.settling_set, r.v, r.d0, r.levels)
    }
}

impl From<DormitoryHierarchy> for HierarchyRepr {
    fn from(h: DormitoryHierarchy) -> Self {
        HierarchyRepr {
            geometry: h.geometry,
            settling_set: h.a,
            v: h.v,
            d0: h.d0,
            levels: h.levels,
        }
    }
}

/// `6^j D_0`, saturating.
pub fn scale_d(d0: u64, j: usize) -> u64 {
    let mut d = d0;
    for _ in 0..j {
        d = d.saturating_mul(6);
    }
    d
}

impl DormitoryHierarchy {
    /// Wraps explicit levels. Fails only on structural errors that would
    /// make lookups meaningless: sites off the torus, empty levels or
    /// clusters, or overlapping clusters within a level.
    pub fn from_levels(
        geometry: TorusGeometry,
        a: SiteSet,
        v: u64,
        d0: u64,
        mut levels: Vec<Vec<Cluster>>,
    ) -> Result<Self> {
        if a.universe() != geometry.volume() {
            return Err(Error::domain("settling set lives on a different torus"));
        }
        if levels.is_empty() {
            return Err(Error::domain("hierarchy needs at least one level"));
        }
        let volume = geometry.volume();
        let mut membership = Vec::with_capacity(levels.len());
        for (j, level) in levels.iter_mut().enumerate() {
            if level.is_empty() {
                return Err(Error::domain(format!("level {j} has no clusters")));
            }
            let mut ids = vec![NO_CLUSTER; volume];
            for (c, cluster) in level.iter_mut().enumerate() {
                if cluster.sites.is_empty() {
                    return Err(Error::domain(format!("cluster {c} of level {j} is empty")));
                }
                cluster.sites.sort_unstable();
                for &x in &cluster.sites {
                    geometry.check(x)?;
                    if ids[x.index()] != NO_CLUSTER {
                        return Err(Error::domain(format!(
                            "site {} lies in two clusters of level {j}",
                            x.0
                        )));
                    }
                    ids[x.index()] = c as u32;
                }
                geometry.check(cluster.distinguished)?;
            }
            membership.push(ids);
        }
        let mut distinguished_top = vec![-1i32; volume];
        for (j, level) in levels.iter().enumerate() {
            for cluster in level {
                let x = cluster.distinguished;
                if distinguished_top[x.index()] == j as i32 - 1 {
                    distinguished_top[x.index()] = j as i32;
                }
            }
        }
        Ok(DormitoryHierarchy {
            geometry,
            a,
            v,
            d0,
            levels,
            membership,
            distinguished_top,
        })
    }

    /// Builds levels from plain partitions, inferring origins and assigning
    /// distinguished vertices: `min C` at level 0, and on a merge the vertex
    /// of the larger part (ties to the part with the smaller minimum).
    pub fn from_partitions(
        geometry: TorusGeometry,
        a: SiteSet,
        v: u64,
        d0: u64,
        partitions: Vec<Vec<Vec<Site>>>,
    ) -> Result<Self> {
        let volume = geometry.volume();
        let mut levels: Vec<Vec<Cluster>> = Vec::with_capacity(partitions.len());
        for (j, part) in partitions.into_iter().enumerate() {
            let mut level = Vec::with_capacity(part.len());
            for mut sites in part {
                sites.sort_unstable();
                sites.dedup();
                if sites.is_empty() {
                    return Err(Error::domain(format!("empty cluster at level {j}")));
                }
                let (origin, distinguished) = match levels.last() {
                    None => (ClusterOrigin::Base, sites[0]),
                    Some(prev) => infer_origin(prev, &sites, volume),
                };
                level.push(Cluster {
                    sites,
                    distinguished,
                    origin,
                });
            }
            levels.push(level);
        }
        Self::from_levels(geometry, a, v, d0, levels)
    }

    /// One level holding all of `A`.
    pub fn trivial(geometry: TorusGeometry, a: SiteSet, v: u64, d0: u64) -> Result<Self> {
        let sites = a.to_vec();
        if sites.is_empty() {
            return Err(Error::domain("trivial hierarchy on an empty set"));
        }
        Self::from_partitions(geometry, a, v, d0, vec![vec![sites]])
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn settling_set(&self) -> &SiteSet {
        &self.a
    }

    pub fn v(&self) -> u64 {
        self.v
    }

    pub fn d0(&self) -> u64 {
        self.d0
    }

    /// `D_j = 6^j D_0`.
    pub fn d(&self, j: usize) -> u64 {
        scale_d(self.d0, j)
    }

    /// Index `J` of the top level.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Vec<Cluster>] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> &[Cluster] {
        &self.levels[j]
    }

    pub fn cluster(&self, j: usize, c: usize) -> &Cluster {
        &self.levels[j][c]
    }

    /// Index of `C_j(x)` in level `j`; `None` when `x ∉ A_j` or `j > J`.
    #[inline]
    pub fn cluster_id(&self, j: usize, x: Site) -> Option<usize> {
        let id = *self.membership.get(j)?.get(x.index())?;
        (id != NO_CLUSTER).then_some(id as usize)
    }

    /// `A_j` as a set.
    pub fn level_set(&self, j: usize) -> SiteSet {
        SiteSet::from_sites(
            self.geometry.volume(),
            self.levels[j].iter().flat_map(|c| c.sites.iter().copied()),
        )
    }

    /// Whether `x = x*_{C_j(x)}`.
    pub fn is_distinguished_at(&self, x: Site, j: usize) -> bool {
        self.cluster_id(j, x)
            .is_some_and(|c| self.levels[j][c].distinguished == x)
    }

    /// Colour-`j` target of `x`, in a form cheap to test membership against.
    #[inline]
    pub fn w_target(&self, x: Site, j: usize) -> WTarget {
        let top = self.distinguished_top[x.index()];
        if top < 0 {
            return match self.cluster_id(0, x) {
                Some(c) => WTarget::Base(c as u32),
                None => WTarget::Empty,
            };
        }
        if j as i32 > top || !self.is_distinguished_at(x, j) {
            return WTarget::Empty;
        }
        match (self.cluster_id(j + 1, x), self.cluster_id(j, x)) {
            (Some(outer), Some(inner)) => {
                if matches!(self.levels[j + 1][outer].origin, ClusterOrigin::Kept(_)) {
                    WTarget::Empty
                } else {
                    WTarget::Ring {
                        level: j as u32,
                        outer: outer as u32,
                        inner: inner as u32,
                    }
                }
            }
            _ => WTarget::Empty,
        }
    }

    #[inline]
    pub fn w_contains(&self, target: WTarget, y: Site) -> bool {
        match target {
            WTarget::Empty => false,
            WTarget::Base(c) => self.membership[0][y.index()] == c,
            WTarget::Ring {
                level,
                outer,
                inner,
            } => {
                let j = level as usize;
                self.membership[j + 1][y.index()] == outer && self.membership[j][y.index()] != inner
            }
        }
    }

    /// `w(x, j)` as an explicit set.
    pub fn w_function(&self, x: Site, j: usize) -> SiteSet {
        let t = self.w_target(x, j);
        let mut out = SiteSet::new(self.geometry.volume());
        let candidates: &[Site] = match t {
            WTarget::Empty => &[],
            WTarget::Base(c) => &self.levels[0][c as usize].sites,
            WTarget::Ring { level, outer, .. } => {
                &self.levels[level as usize + 1][outer as usize].sites
            }
        };
        for &y in candidates {
            if self.w_contains(t, y) {
                out.insert(y);
            }
        }
        out
    }

    /// Replaces a distinguished vertex; for building deliberately broken
    /// hierarchies in tests.
    pub fn with_distinguished(mut self, j: usize, c: usize, x: Site) -> Result<Self> {
        self.levels[j][c].distinguished = x;
        Self::from_levels(self.geometry, self.a, self.v, self.d0, self.levels)
    }
}

/// Compact description of `w(x, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WTarget {
    Empty,
    /// `C_0(x)`, by level-0 cluster index.
    Base(u32),
    /// `C_{j+1}(x) \ C_j(x)`.
    Ring {
        level: u32,
        outer: u32,
        inner: u32,
    },
}

fn infer_origin(prev: &[Cluster], sites: &[Site], volume: usize) -> (ClusterOrigin, Site) {
    let mut ids = vec![NO_CLUSTER; volume];
    for (c, cl) in prev.iter().enumerate() {
        for &x in &cl.sites {
            ids[x.index()] = c as u32;
        }
    }
    let mut parts: Vec<usize> = sites
        .iter()
        .filter_map(|x| ids.get(x.index()).copied().filter(|&c| c != NO_CLUSTER))
        .map(|c| c as usize)
        .collect();
    parts.sort_unstable();
    parts.dedup();
    let covered: usize = parts.iter().map(|&c| prev[c].len()).sum();
    let fallback = (ClusterOrigin::Irregular, sites[0]);
    if covered != sites.len() || sites.iter().any(|x| ids[x.index()] == NO_CLUSTER) {
        return fallback;
    }
    match *parts.as_slice() {
        [c] => (ClusterOrigin::Kept(c), prev[c].distinguished),
        [a, b] => {
            let (big, small) = larger_first(prev, a, b);
            (ClusterOrigin::Merged(big, small), prev[big].distinguished)
        }
        _ => fallback,
    }
}

/// Orders two clusters by size, ties to the one with the smaller minimum.
pub(crate) fn larger_first(level: &[Cluster], a: usize, b: usize) -> (usize, usize) {
    let ka = (std::cmp::Reverse(level[a].len()), level[a].min_site());
    let kb = (std::cmp::Reverse(level[b].len()), level[b].min_site());
    if ka <= kb {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    NotInSettlingSet,
    NotNested,
    ClusterTooSmall,
    NotAUnionOfTwo,
    DiameterTooLarge,
    TopNotSingle,
    DistinguishedOutside,
    DistinguishedNotFromLargerPart,
    DistinguishedChangedWhenKept,
    OriginMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub level: usize,
    pub cluster: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub first_violation: Option<Violation>,
}

/// Checks the defining conditions of a `(v, D)`-dormitory hierarchy from
/// the sites themselves (origins are only cross-checked), plus the
/// distinguished-vertex rules.
pub fn validate_hierarchy(h: &DormitoryHierarchy) -> ValidationReport {
    match first_violation(h) {
        None => ValidationReport {
            valid: true,
            first_violation: None,
        },
        Some(v) => ValidationReport {
            valid: false,
            first_violation: Some(v),
        },
    }
}

fn first_violation(h: &DormitoryHierarchy) -> Option<Violation> {
    let fail = |level: usize, cluster: Option<usize>, kind: ViolationKind, detail: String| {
        Some(Violation {
            level,
            cluster,
            kind,
            detail,
        })
    };
    let top = h.top();
    for (j, level) in h.levels.iter().enumerate() {
        let min_size = (1u64 << (j / 2).min(63)).saturating_mul(h.v);
        for (c, cl) in level.iter().enumerate() {
            if let Some(x) = cl.sites.iter().find(|x| !h.a.contains(**x)) {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::NotInSettlingSet,
                    format!("site {}", x.0),
                );
            }
            if (cl.len() as u64) < min_size {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::ClusterTooSmall,
                    format!("size {} < {min_size}", cl.len()),
                );
            }
            if h.membership[j][cl.distinguished.index()] != c as u32 {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::DistinguishedOutside,
                    format!("site {}", cl.distinguished.0),
                );
            }
        }
        if j == 0 {
            continue;
        }
        let prev = &h.levels[j - 1];
        let prev_ids = &h.membership[j - 1];
        for (c, cl) in level.iter().enumerate() {
            if let Some(x) = cl.sites.iter().find(|x| prev_ids[x.index()] == NO_CLUSTER) {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::NotNested,
                    format!("site {} is not in level {}", x.0, j - 1),
                );
            }
            let mut parts: Vec<usize> = cl
                .sites
                .iter()
                .map(|x| prev_ids[x.index()] as usize)
                .collect();
            parts.sort_unstable();
            parts.dedup();
            let covered: usize = parts.iter().map(|&p| prev[p].len()).sum();
            if covered != cl.len() || parts.len() > 2 {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::NotAUnionOfTwo,
                    format!(
                        "meets {} clusters of level {} covering {covered} sites",
                        parts.len(),
                        j - 1
                    ),
                );
            }
            if parts.len() == 1 {
                let p = parts[0];
                if cl.distinguished != prev[p].distinguished {
                    return fail(
                        j,
                        Some(c),
                        ViolationKind::DistinguishedChangedWhenKept,
                        format!("{} vs {}", cl.distinguished.0, prev[p].distinguished.0),
                    );
                }
                if cl.origin != ClusterOrigin::Kept(p) {
                    return fail(
                        j,
                        Some(c),
                        ViolationKind::OriginMismatch,
                        format!("{:?}", cl.origin),
                    );
                }
                continue;
            }
            let (a, b) = (parts[0], parts[1]);
            let bound = h.d(j - 1);
            if !h.geometry.diameter_at_most(&cl.sites, bound) {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::DiameterTooLarge,
                    format!("D_{} = {bound}", j - 1),
                );
            }
            let (la, lb) = (prev[a].len(), prev[b].len());
            let allowed: Vec<usize> = match la.cmp(&lb) {
                std::cmp::Ordering::Greater => vec![a],
                std::cmp::Ordering::Less => vec![b],
                std::cmp::Ordering::Equal => vec![a, b],
            };
            if !allowed
                .iter()
                .any(|&p| prev[p].distinguished == cl.distinguished)
            {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::DistinguishedNotFromLargerPart,
                    format!("site {}", cl.distinguished.0),
                );
            }
            let carrier = prev_ids[cl.distinguished.index()] as usize;
            let other = if carrier == a { b } else { a };
            if cl.origin != ClusterOrigin::Merged(carrier, other) {
                return fail(
                    j,
                    Some(c),
                    ViolationKind::OriginMismatch,
                    format!("{:?}", cl.origin),
                );
            }
        }
    }
    if h.levels[top].len() != 1 {
        return fail(
            top,
            None,
            ViolationKind::TopNotSingle,
            format!("{} clusters at the top level", h.levels[top].len()),
        );
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: u32) -> TorusGeometry {
        TorusGeometry::new(n, 1).unwrap()
    }

    fn s(v: &[u32]) -> Vec<Site> {
        v.iter().map(|&i| Site(i)).collect()
    }

    #[test]
    fn trivial_is_valid() {
        let g = line(10);
        let a = SiteSet::from_sites(10, s(&[2, 3, 4]));
        let h = DormitoryHierarchy::trivial(g, a, 3, 5).unwrap();
        assert!(validate_hierarchy(&h).valid);
        assert_eq!(h.top(), 0);
    }

    #[test]
    fn triple_union_is_invalid() {
        let g = line(10);
        let a = SiteSet::from_sites(10, s(&[0, 1, 2]));
        let parts = vec![vec![s(&[0]), s(&[1]), s(&[2])], vec![s(&[0, 1, 2])]];
        let h = DormitoryHierarchy::from_partitions(g, a, 1, 10, parts).unwrap();
        let rep = validate_hierarchy(&h);
        assert!(!rep.valid);
        assert_eq!(
            rep.first_violation.unwrap().kind,
            ViolationKind::NotAUnionOfTwo
        );
    }

    #[test]
    fn distinguished_from_smaller_part_is_invalid() {
        let g = line(10);
        let a = SiteSet::from_sites(10, s(&[0, 1, 2]));
        let parts = vec![vec![s(&[0, 1]), s(&[2])], vec![s(&[0, 1, 2])]];
        let h = DormitoryHierarchy::from_partitions(g, a, 1, 10, parts).unwrap();
        assert!(validate_hierarchy(&h).valid);
        assert_eq!(h.cluster(1, 0).distinguished, Site(0));
        let bad = h.with_distinguished(1, 0, Site(2)).unwrap();
        assert_eq!(
            validate_hierarchy(&bad).first_violation.unwrap().kind,
            ViolationKind::DistinguishedNotFromLargerPart
        );
    }

    #[test]
    fn w_examples() {
        // C = {0,1} kept at level 1, D = {5} merged with E = {6} at level 1,
        // everything merged at level 2.
        let g = line(12);
        let a = SiteSet::from_sites(12, s(&[0, 1, 5, 6]));
        let parts = vec![
            vec![s(&[0, 1]), s(&[5]), s(&[6])],
            vec![s(&[0, 1]), s(&[5, 6])],
            vec![s(&[0, 1, 5, 6])],
        ];
        let h = DormitoryHierarchy::from_partitions(g, a, 1, 6, parts).unwrap();
        assert!(validate_hierarchy(&h).valid, "{:?}", validate_hierarchy(&h));
        // non-distinguished site: C_0(x) for every colour
        assert_eq!(h.w_function(Site(1), 0).to_vec(), s(&[0, 1]));
        assert_eq!(h.w_function(Site(1), 3).to_vec(), s(&[0, 1]));
        // kept at level 1: colour 0 wakes nobody
        assert!(h.w_function(Site(0), 0).is_empty());
        assert_eq!(h.w_function(Site(0), 1).to_vec(), s(&[5, 6]));
        // merged at level 1
        assert_eq!(h.w_function(Site(5), 0).to_vec(), s(&[6]));
        // distinguished at level 0 only
        assert!(h.w_function(Site(6), 1).is_empty());
        // beyond the top
        assert!(h.w_function(Site(0), 2).is_empty());
    }

    #[test]
    fn serde_round_trip() {
        let g = line(8);
        let a = SiteSet::from_sites(8, s(&[1, 4]));
        let parts = vec![vec![s(&[1]), s(&[4])], vec![s(&[1, 4])]];
        let h = DormitoryHierarchy::from_partitions(g, a, 1, 8, parts).unwrap();
        let json = serde_json::to_string(&h).unwrap();
        let back: DormitoryHierarchy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn d_sequence() {
        assert_eq!(scale_d(20, 3), 216 * 20);
        assert_eq!(scale_d(u64::MAX / 2, 2), u64::MAX);
    }
}
