//! Geometry of the discrete torus `Z_n^d`.
//!
//! Sites are flat row-major indices: coordinate 0 varies slowest. The
//! distance is the sup-norm of the shortest lift, computed per coordinate as
//! `min(|a-b|, n-|a-b|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::union_find::DisjointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub u32);

impl Site {
    #[inline(always)]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Serialize, Deserialize)]
struct TorusShape {
    n: u32,
    d: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TorusShape", into = "TorusShape")]
pub struct TorusGeometry {
    n: u32,
    d: u32,
    volume: usize,
    // strides[k] = n^(d-1-k)
    strides: Vec<usize>,
}

impl TryFrom<TorusShape> for TorusGeometry {
    type Error = Error;
    fn try_from(s: TorusShape) -> Result<Self> {
        TorusGeometry::new(s.n, s.d)
    }
}

impl From<TorusGeometry> for TorusShape {
    fn from(g: TorusGeometry) -> Self {
        TorusShape { n: g.n, d: g.d }
    }
}

impl TorusGeometry {
    pub fn new(n: u32, d: u32) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::domain(format!(
                "torus needs n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        let volume = (n as u64)
            .checked_pow(d)
            .filter(|&v| v <= u32::MAX as u64)
            .ok_or_else(|| Error::domain(format!("torus {n}^{d} is too large")))?
            as usize;
        let strides = (0..d).map(|k| (n as usize).pow(d - 1 - k)).collect();
        Ok(TorusGeometry {
            n,
            d,
            volume,
            strides,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn check(&self, x: Site) -> Result<()> {
        if x.index() < self.volume {
            Ok(())
        } else {
            Err(Error::InvalidSite {
                site: x.index(),
                volume: self.volume,
            })
        }
    }

    pub fn site(&self, index: usize) -> Result<Site> {
        let s = Site(index.min(u32::MAX as usize) as u32);
        if index >= self.volume {
            return Err(Error::InvalidSite {
                site: index,
                volume: self.volume,
            });
        }
        Ok(s)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> {
        (0..self.volume as u32).map(Site)
    }

    #[inline]
    pub fn coord(&self, x: Site, axis: usize) -> u32 {
        ((x.index() / self.strides[axis]) % self.n as usize) as u32
    }

    pub fn coords(&self, x: Site) -> Vec<u32> {
        (0..self.d as usize).map(|k| self.coord(x, k)).collect()
    }

    /// Site with the given coordinates, each reduced mod n.
    pub fn site_at(&self, coords: &[i64]) -> Result<Site> {
        if coords.len() != self.d as usize {
            return Err(Error::domain(format!(
                "expected {} coordinates, got {}",
                self.d,
                coords.len()
            )));
        }
        let n = self.n as i64;
        let idx = coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c.rem_euclid(n) as usize * s)
            .sum::<usize>();
        Ok(Site(idx as u32))
    }

    /// Distance without range checks, for inner loops.
    #[inline]
    pub fn dist(&self, x: Site, y: Site) -> u32 {
        let n = self.n as usize;
        let (mut a, mut b) = (x.index(), y.index());
        let mut best = 0u32;
        for _ in 0..self.d {
            let (ca, cb) = (a % n, b % n);
            a /= n;
            b /= n;
            let diff = ca.abs_diff(cb);
            let wrapped = diff.min(n - diff) as u32;
            best = best.max(wrapped);
        }
        best
    }

    pub fn distance(&self, x: Site, y: Site) -> Result<u32> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.dist(x, y))
    }

    /// Number of sites in a ball of radius `r`.
    pub fn ball_volume(&self, r: u32) -> usize {
        let side = (2 * r as u64 + 1).min(self.n as u64) as usize;
        side.pow(self.d)
    }

    /// Calls `f` once for every site of `B(x, r)`.
    pub fn for_each_in_ball(&self, x: Site, r: u32, mut f: impl FnMut(Site)) {
        let d = self.d as usize;
        let n = self.n as i64;
        let full = 2 * r as u64 + 1 >= self.n as u64;
        let (lo, hi) = if full {
            (0, n - 1)
        } else {
            (-(r as i64), r as i64)
        };
        let base: Vec<i64> = (0..d).map(|k| self.coord(x, k) as i64).collect();
        let mut off = vec![lo; d];
        loop {
            let idx = (0..d)
                .map(|k| {
                    let c = if full {
                        off[k]
                    } else {
                        (base[k] + off[k]).rem_euclid(n)
                    };
                    c as usize * self.strides[k]
                })
                .sum::<usize>();
            f(Site(idx as u32));
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if off[k] < hi {
                    off[k] += 1;
                    break;
                }
                off[k] = lo;
            }
        }
    }

    pub fn ball(&self, x: Site, r: u32) -> Result<SiteSet> {
        self.check(x)?;
        let mut out = SiteSet::new(self.volume);
        self.for_each_in_ball(x, r, |y| {
            out.insert(y);
        });
        Ok(out)
    }

    pub fn diameter(&self, c: &SiteSet) -> Result<u32> {
        let sites: Vec<Site> = c.iter().collect();
        self.diameter_of(&sites)
    }

    pub fn diameter_of(&self, sites: &[Site]) -> Result<u32> {
        if sites.is_empty() {
            return Err(Error::domain("diameter of an empty set"));
        }
        let half = self.n / 2;
        let mut best = 0;
        for (i, &x) in sites.iter().enumerate() {
            for &y in &sites[i + 1..] {
                best = best.max(self.dist(x, y));
                if best == half {
                    return Ok(best);
                }
            }
        }
        Ok(best)
    }

    /// Whether `diam(sites) <= bound`, with an early exit.
    pub fn diameter_at_most(&self, sites: &[Site], bound: u64) -> bool {
        if bound >= (self.n / 2) as u64 {
            return true;
        }
        let bound = bound as u32;
        sites
            .iter()
            .enumerate()
            .all(|(i, &x)| sites[i + 1..].iter().all(|&y| self.dist(x, y) <= bound))
    }

    /// Maximal `r`-connected components of `c`, each sorted ascending,
    /// ordered by smallest member.
    pub fn r_components(&self, c: &SiteSet, r: u32) -> Vec<Vec<Site>> {
        let sites: Vec<Site> = c.iter().collect();
        self.r_components_of(&sites, r)
    }

    /// Same as [`Self::r_components`] for an ascending slice of sites.
    pub fn r_components_of(&self, sites: &[Site], r: u32) -> Vec<Vec<Site>> {
        let m = sites.len();
        let mut ds = DisjointSet::new(m);
        if self.ball_volume(r) < m {
            let mut slot = vec![u32::MAX; self.volume];
            for (i, s) in sites.iter().enumerate() {
                slot[s.index()] = i as u32;
            }
            for (i, &x) in sites.iter().enumerate() {
                self.for_each_in_ball(x, r, |y| {
                    let j = slot[y.index()];
                    if j != u32::MAX {
                        ds.union(i, j as usize);
                    }
                });
            }
        } else {
            for i in 0..m {
                for j in i + 1..m {
                    if self.dist(sites[i], sites[j]) <= r {
                        ds.union(i, j);
                    }
                }
            }
        }
        ds.groups()
            .into_iter()
            .map(|g| g.into_iter().map(|i| sites[i]).collect())
            .collect()
    }

    /// The site one step from `x` along `dir`: axis `dir / 2`, sign from
    /// `dir % 2`.
    #[inline]
    pub fn neighbour(&self, x: Site, dir: u32) -> Site {
        let axis = (dir / 2) as usize;
        let stride = self.strides[axis];
        let n = self.n as usize;
        let c = (x.index() / stride) % n;
        let idx = x.index();
        let moved = if dir.is_multiple_of(2) {
            if c + 1 == n {
                idx + stride - n * stride
            } else {
                idx + stride
            }
        } else if c == 0 {
            idx + (n - 1) * stride
        } else {
            idx - stride
        };
        Site(moved as u32)
    }

    /// Number of walk directions, `2d`.
    pub fn directions(&self) -> u32 {
        2 * self.d
    }
}

/// Dense bitset over the sites of a torus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteSet {
    words: Vec<u64>,
    universe: usize,
    len: usize,
}

impl SiteSet {
    pub fn new(universe: usize) -> Self {
        SiteSet {
            words: vec![0; universe.div_ceil(64)],
            universe,
            len: 0,
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = SiteSet::new(universe);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        if !universe.is_multiple_of(64) {
            if let Some(last) = s.words.last_mut() {
                *last = (1u64 << (universe % 64)) - 1;
            }
        }
        s.len = universe;
        s
    }

    pub fn from_sites(universe: usize, sites: impl IntoIterator<Item = Site>) -> Self {
        let mut s = SiteSet::new(universe);
        for x in sites {
            s.insert(x);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn contains(&self, x: Site) -> bool {
        let i = x.index();
        i < self.universe && self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    /// Returns `true` when `x` was not already present.
    #[inline]
    pub fn insert(&mut self, x: Site) -> bool {
        let i = x.index();
        assert!(
            i < self.universe,
            "site {i} outside universe {}",
            self.universe
        );
        let w = &mut self.words[i >> 6];
        let bit = 1u64 << (i & 63);
        let fresh = *w & bit == 0;
        *w |= bit;
        self.len += fresh as usize;
        fresh
    }

    /// Returns `true` when `x` was present.
    #[inline]
    pub fn remove(&mut self, x: Site) -> bool {
        let i = x.index();
        if i >= self.universe {
            return false;
        }
        let w = &mut self.words[i >> 6];
        let bit = 1u64 << (i & 63);
        let had = *w & bit != 0;
        *w &= !bit;
        self.len -= had as usize;
        had
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
        self.len = 0;
    }

    pub fn iter(&self) -> impl Iterator<Item = Site> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let t = bits.trailing_zeros();
                bits &= bits - 1;
                Some(Site((wi * 64 + t as usize) as u32))
            })
        })
    }

    pub fn first(&self) -> Option<Site> {
        self.iter().next()
    }

    fn recount(&mut self) {
        self.len = self.words.iter().map(|w| w.count_ones() as usize).sum();
    }

    fn same_universe(&self, other: &SiteSet) {
        assert_eq!(
            self.universe, other.universe,
            "site sets over different tori"
        );
    }

    pub fn union_with(&mut self, other: &SiteSet) {
        self.same_universe(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self.recount();
    }

    pub fn intersect_with(&mut self, other: &SiteSet) {
        self.same_universe(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
        self.recount();
    }

    pub fn difference_with(&mut self, other: &SiteSet) {
        self.same_universe(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
        self.recount();
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &SiteSet) -> SiteSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        let mut s = self.clone();
        s.difference_with(other);
        s
    }

    pub fn intersection_len(&self, other: &SiteSet) -> usize {
        self.same_universe(other);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.same_universe(other);
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &SiteSet) -> bool {
        self.intersection_len(other) == 0
    }

    pub fn to_vec(&self) -> Vec<Site> {
        self.iter().collect()
    }
}

#[derive(Serialize, Deserialize)]
struct SiteSetRepr {
    universe: usize,
    sites: Vec<Site>,
}

impl Serialize for SiteSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SiteSetRepr {
            universe: self.universe,
            sites: self.to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SiteSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SiteSetRepr::deserialize(d)?;
        if let Some(bad) = repr.sites.iter().find(|s| s.index() >= repr.universe) {
            return Err(serde::de::Error::custom(format!(
                "site {} outside universe {}",
                bad.0, repr.universe
            )));
        }
        Ok(SiteSet::from_sites(repr.universe, repr.sites))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(g: &TorusGeometry, c: &[i64]) -> Site {
        g.site_at(c).unwrap()
    }

    #[test]
    fn distance_examples() {
        let g1 = TorusGeometry::new(10, 1).unwrap();
        assert_eq!(g1.distance(Site(0), Site(9)).unwrap(), 1);
        let g2 = TorusGeometry::new(10, 2).unwrap();
        let (x, y) = (at(&g2, &[0, 0]), at(&g2, &[3, 4]));
        assert_eq!(g2.distance(x, y).unwrap(), 4);
        assert_eq!(g2.distance(x, x).unwrap(), 0);
        assert!(matches!(
            g2.distance(x, Site(100)),
            Err(Error::InvalidSite { .. })
        ));
    }

    #[test]
    fn ball_examples() {
        let g = TorusGeometry::new(10, 2).unwrap();
        assert_eq!(g.ball(Site(0), 1).unwrap().len(), 9);
        assert_eq!(g.ball(Site(37), 0).unwrap().to_vec(), vec![Site(37)]);
        let small = TorusGeometry::new(3, 2).unwrap();
        assert_eq!(small.ball(Site(4), 5).unwrap().len(), 9);
    }

    #[test]
    fn diameter_examples() {
        let g1 = TorusGeometry::new(10, 1).unwrap();
        assert_eq!(g1.diameter(&SiteSet::from_sites(10, [Site(3)])).unwrap(), 0);
        assert_eq!(
            g1.diameter(&SiteSet::from_sites(10, [Site(0), Site(9)]))
                .unwrap(),
            1
        );
        let g2 = TorusGeometry::new(10, 2).unwrap();
        let c = SiteSet::from_sites(100, [at(&g2, &[0, 0]), at(&g2, &[3, 4]), at(&g2, &[0, 4])]);
        assert_eq!(g2.diameter(&c).unwrap(), 4);
        assert!(g2.diameter(&SiteSet::new(100)).is_err());
    }

    #[test]
    fn component_examples() {
        let g = TorusGeometry::new(20, 1).unwrap();
        let c = SiteSet::from_sites(20, [Site(0), Site(5), Site(11)]);
        assert_eq!(
            g.r_components(&c, 5),
            vec![vec![Site(0), Site(5)], vec![Site(11)]]
        );
        assert_eq!(g.r_components(&c, 6).len(), 1);
        assert!(g.r_components(&SiteSet::new(20), 1).is_empty());
    }

    #[test]
    fn neighbours_wrap() {
        let g = TorusGeometry::new(4, 2).unwrap();
        let x = at(&g, &[0, 3]);
        assert_eq!(g.coords(g.neighbour(x, 2)), vec![0, 0]);
        assert_eq!(g.coords(g.neighbour(x, 3)), vec![0, 2]);
        assert_eq!(g.coords(g.neighbour(x, 1)), vec![3, 3]);
        assert_eq!(g.coords(g.neighbour(x, 0)), vec![1, 3]);
        for dir in 0..4 {
            assert_eq!(g.dist(x, g.neighbour(x, dir)), 1);
        }
    }

    #[test]
    fn site_set_algebra() {
        let a = SiteSet::from_sites(130, [Site(1), Site(64), Site(129)]);
        let b = SiteSet::from_sites(130, [Site(64), Site(2)]);
        assert_eq!(a.union(&b).len(), 4);
        assert_eq!(a.intersection(&b).to_vec(), vec![Site(64)]);
        assert_eq!(a.difference(&b).to_vec(), vec![Site(1), Site(129)]);
        assert!(a.intersection(&b).is_subset(&a));
        assert_eq!(SiteSet::full(130).len(), 130);
        assert_eq!(SiteSet::full(130).iter().last(), Some(Site(129)));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<SiteSet>(&json).unwrap(), a);
    }
}
