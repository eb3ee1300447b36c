//! Reference site-wise ARW model: instruction stacks, toppling, and
//! stabilization under pluggable toppling orders.
//!
//! Particles may only fall asleep on the settling set `A`; elsewhere every
//! instruction is a jump.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{below, mix64, tag, BernoulliThreshold, KeyedRng, StreamKey};
use crate::torus::{Site, SiteSet, TorusGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instruction {
    Sleep,
    /// Direction in `0..2d`, see [`TorusGeometry::neighbour`].
    Jump(u32),
}

/// Counter-based instruction stacks `τ(x, h)`.
#[derive(Clone, Debug)]
pub struct InstructionStacks {
    /// Per-site stream keys, hashed once.
    keys: Vec<StreamKey>,
    sleep: BernoulliThreshold,
    in_a: Vec<bool>,
    dirs: u32,
    lambda: f64,
}

impl InstructionStacks {
    pub fn new(g: &TorusGeometry, a: &SiteSet, lambda: f64, seed: u64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!(
                "sleep rate must be positive and finite, got {lambda}"
            )));
        }
        if a.universe() != g.volume() {
            return Err(Error::domain("settling set lives on a different torus"));
        }
        let mut in_a = vec![false; g.volume()];
        for x in a.iter() {
            in_a[x.index()] = true;
        }
        let key = StreamKey::new(seed).child(tag::INSTRUCTION);
        Ok(InstructionStacks {
            keys: g.sites().map(|x| key.child(x.0 as u64)).collect(),
            sleep: BernoulliThreshold::new(lambda / (1.0 + lambda)),
            in_a,
            dirs: g.directions(),
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn in_a(&self, x: Site) -> bool {
        self.in_a[x.index()]
    }

    /// The instruction at height `h` of the stack at `x`.
    #[inline]
    pub fn instruction(&self, x: Site, h: u64) -> Instruction {
        let u = self.keys[x.index()].at(h);
        if self.in_a[x.index()] && self.sleep.test(u) {
            Instruction::Sleep
        } else {
            Instruction::Jump(below(mix64(u ^ 0xD1B5_4A32_D192_ED03), self.dirs))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ToppleOutcome {
    FellAsleep,
    /// SLEEP read on a site with two or more particles.
    SleepIgnored,
    /// One particle moved to `to`; `woke` is true when it woke a sleeper.
    Jumped {
        to: Site,
        woke: bool,
    },
}

/// Particle configuration together with its instruction stacks and odometer.
#[derive(Clone, Debug)]
pub struct ReferenceArwState {
    geometry: TorusGeometry,
    a: SiteSet,
    stacks: InstructionStacks,
    /// `neighbours[2d * x + dir]`.
    neighbours: Vec<Site>,
    counts: Vec<u32>,
    asleep: Vec<bool>,
    odometer: Vec<u64>,
    on_a: u64,
    total: u64,
}

impl ReferenceArwState {
    /// All particles start awake.
    pub fn new(
        geometry: TorusGeometry,
        a: SiteSet,
        lambda: f64,
        seed: u64,
        counts: Vec<u32>,
    ) -> Result<Self> {
        if counts.len() != geometry.volume() {
            return Err(Error::domain(format!(
                "configuration has {} sites, torus has {}",
                counts.len(),
                geometry.volume()
            )));
        }
        let stacks = InstructionStacks::new(&geometry, &a, lambda, seed)?;
        let v = geometry.volume();
        let neighbours = geometry
            .sites()
            .flat_map(|x| (0..geometry.directions()).map(move |dir| (x, dir)))
            .map(|(x, dir)| geometry.neighbour(x, dir))
            .collect();
        Ok(ReferenceArwState {
            geometry,
            a,
            stacks,
            neighbours,
            counts,
            asleep: vec![false; v],
            odometer: vec![0; v],
            on_a: 0,
            total: 0,
        })
    }

    /// One particle on every site of `A`.
    pub fn one_per_site(
        geometry: TorusGeometry,
        a: SiteSet,
        lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut counts = vec![0; geometry.volume()];
        for x in a.iter() {
            counts[x.index()] = 1;
        }
        Self::new(geometry, a, lambda, seed, counts)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn settling_set(&self) -> &SiteSet {
        &self.a
    }

    pub fn stacks(&self) -> &InstructionStacks {
        &self.stacks
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn asleep(&self) -> &[bool] {
        &self.asleep
    }

    pub fn odometer(&self) -> &[u64] {
        &self.odometer
    }

    /// Instructions consumed on sites of `A` so far.
    pub fn m_a(&self) -> u64 {
        self.on_a
    }

    pub fn total_topplings(&self) -> u64 {
        self.total
    }

    pub fn particle_count(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    #[inline]
    pub fn is_active(&self, x: Site) -> bool {
        self.counts[x.index()] > 0 && !self.asleep[x.index()]
    }

    pub fn active_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.geometry.sites().filter(|&x| self.is_active(x))
    }

    /// Adds one awake particle at `x`, waking a sleeper there.
    pub fn add_particle(&mut self, x: Site) -> Result<()> {
        self.geometry.check(x)?;
        self.counts[x.index()] += 1;
        self.asleep[x.index()] = false;
        Ok(())
    }

    /// Consumes the next instruction at `x`.
    pub fn topple(&mut self, x: Site) -> Result<ToppleOutcome> {
        self.geometry.check(x)?;
        if !self.is_active(x) {
            return Err(Error::IllegalToppling(x));
        }
        Ok(self.topple_unchecked(x))
    }

    #[inline]
    fn topple_unchecked(&mut self, x: Site) -> ToppleOutcome {
        let i = x.index();
        let h = self.odometer[i];
        self.odometer[i] = h + 1;
        self.total += 1;
        if self.stacks.in_a[i] {
            self.on_a += 1;
        }
        match self.stacks.instruction(x, h) {
            Instruction::Sleep => {
                if self.counts[i] == 1 {
                    self.asleep[i] = true;
                    ToppleOutcome::FellAsleep
                } else {
                    ToppleOutcome::SleepIgnored
                }
            }
            Instruction::Jump(dir) => {
                let y = self.neighbours[i * self.stacks.dirs as usize + dir as usize];
                self.counts[i] -= 1;
                let j = y.index();
                self.counts[j] += 1;
                let woke = std::mem::replace(&mut self.asleep[j], false);
                ToppleOutcome::Jumped { to: y, woke }
            }
        }
    }
}

/// Rule choosing the next active site to topple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderPolicy {
    Fifo,
    /// Uniform over currently active sites, drawn from a separate stream.
    Random {
        seed: u64,
    },
    LowestIndex,
    /// Always the active site of smallest rank; `ranks` has one entry per site.
    Scripted {
        ranks: Vec<u32>,
    },
}

impl OrderPolicy {
    /// Scripted order from a uniformly random permutation of the sites.
    pub fn random_script(volume: usize, seed: u64) -> Self {
        let mut ranks: Vec<u32> = (0..volume as u32).collect();
        let mut rng = StreamKey::new(seed).child(tag::ORDER).rng();
        for i in (1..volume).rev() {
            let j = below(rng.next_word(), i as u32 + 1) as usize;
            ranks.swap(i, j);
        }
        OrderPolicy::Scripted { ranks }
    }

    /// Scripted order preferring the highest index.
    pub fn reverse(volume: usize) -> Self {
        OrderPolicy::Scripted {
            ranks: (0..volume as u32).rev().collect(),
        }
    }
}

enum Worklist {
    Fifo {
        queue: VecDeque<Site>,
        queued: Vec<bool>,
    },
    Random {
        rng: KeyedRng,
        items: Vec<Site>,
        pos: Vec<u32>,
    },
    Ranked {
        heap: BinaryHeap<Reverse<(u32, u32)>>,
        queued: Vec<bool>,
        ranks: Option<Vec<u32>>,
    },
}

const ABSENT: u32 = u32::MAX;

impl Worklist {
    fn new(policy: &OrderPolicy, volume: usize) -> Result<Self> {
        Ok(match policy {
            OrderPolicy::Fifo => Worklist::Fifo {
                queue: VecDeque::new(),
                queued: vec![false; volume],
            },
            OrderPolicy::Random { seed } => Worklist::Random {
                rng: StreamKey::new(*seed).child(tag::ORDER).rng(),
                items: Vec::new(),
                pos: vec![ABSENT; volume],
            },
            OrderPolicy::LowestIndex => Worklist::Ranked {
                heap: BinaryHeap::new(),
                queued: vec![false; volume],
                ranks: None,
            },
            OrderPolicy::Scripted { ranks } => {
                if ranks.len() != volume {
                    return Err(Error::domain(format!(
                        "scripted order has {} ranks for {volume} sites",
                        ranks.len()
                    )));
                }
                Worklist::Ranked {
                    heap: BinaryHeap::new(),
                    queued: vec![false; volume],
                    ranks: Some(ranks.clone()),
                }
            }
        })
    }

    /// Tells the worklist that the activity of `x` may have changed.
    #[inline]
    fn refresh(&mut self, x: Site, active: bool) {
        let i = x.index();
        match self {
            Worklist::Fifo { queue, queued } => {
                if active && !queued[i] {
                    queued[i] = true;
                    queue.push_back(x);
                }
            }
            Worklist::Random { items, pos, .. } => {
                if active && pos[i] == ABSENT {
                    pos[i] = items.len() as u32;
                    items.push(x);
                } else if !active && pos[i] != ABSENT {
                    let at = pos[i] as usize;
                    let last = items.pop().expect("non-empty");
                    if last != x {
                        items[at] = last;
                        pos[last.index()] = at as u32;
                    }
                    pos[i] = ABSENT;
                }
            }
            Worklist::Ranked {
                heap,
                queued,
                ranks,
            } => {
                if active && !queued[i] {
                    queued[i] = true;
                    let rank = ranks.as_ref().map_or(x.0, |r| r[i]);
                    heap.push(Reverse((rank, x.0)));
                }
            }
        }
    }

    /// Next active site, or `None` when the configuration is stable.
    #[inline]
    fn next(&mut self, state: &ReferenceArwState) -> Option<Site> {
        match self {
            Worklist::Fifo { queue, queued } => {
                while let Some(x) = queue.pop_front() {
                    queued[x.index()] = false;
                    if state.is_active(x) {
                        return Some(x);
                    }
                }
                None
            }
            Worklist::Random { rng, items, .. } => {
                if items.is_empty() {
                    None
                } else {
                    Some(items[below(rng.next_word(), items.len() as u32) as usize])
                }
            }
            Worklist::Ranked { heap, queued, .. } => {
                while let Some(&Reverse((_, s))) = heap.peek() {
                    let x = Site(s);
                    if state.is_active(x) {
                        return Some(x);
                    }
                    heap.pop();
                    queued[x.index()] = false;
                }
                None
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceOutcome {
    pub m_a: u64,
    pub total_topplings: u64,
}

/// Topples active sites in the order given by `policy` until the
/// configuration is stable.
///
/// Counters accumulate on top of whatever the state already consumed.
/// `budget` caps the number of topplings made by this call.
pub fn stabilize_reference(
    state: &mut ReferenceArwState,
    policy: &OrderPolicy,
    budget: u64,
) -> Result<ReferenceOutcome> {
    let mut work = Worklist::new(policy, state.geometry.volume())?;
    for x in state.geometry.sites() {
        if state.is_active(x) {
            work.refresh(x, true);
        }
    }
    let mut used = 0u64;
    while let Some(x) = work.next(state) {
        if used >= budget {
            return Err(Error::ReferenceBudget {
                consumed: state.total,
                on_a: state.on_a,
            });
        }
        used += 1;
        // FIFO pops x, so it must be re-queued while still active.
        let outcome = state.topple_unchecked(x);
        work.refresh(x, state.is_active(x));
        if let ToppleOutcome::Jumped { to, .. } = outcome {
            work.refresh(to, state.is_active(to));
        }
    }
    Ok(ReferenceOutcome {
        m_a: state.on_a,
        total_topplings: state.total,
    })
}

/// Places `particles` particles on distinct uniformly chosen sites of `a`.
pub fn random_configuration(a: &SiteSet, particles: usize, seed: u64) -> Result<Vec<u32>> {
    let mut sites = a.to_vec();
    if particles > sites.len() {
        return Err(Error::domain(format!(
            "cannot place {particles} particles on distinct sites of a set of size {}",
            sites.len()
        )));
    }
    let mut rng = StreamKey::new(seed).child(tag::CONFIG).rng();
    for i in 0..particles {
        let j = i + below(rng.next_word(), (sites.len() - i) as u32) as usize;
        sites.swap(i, j);
    }
    let mut counts = vec![0u32; a.universe()];
    for x in &sites[..particles] {
        counts[x.index()] = 1;
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianMismatch {
    pub order: usize,
    pub site: Site,
    pub field: String,
    pub expected: u64,
    pub got: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianReport {
    pub orders: usize,
    pub identical: bool,
    pub m_a: u64,
    pub mismatches: Vec<AbelianMismatch>,
}

/// A mix of deterministic and randomised orders for abelianity checks.
pub fn standard_orders(volume: usize, count: usize, seed: u64) -> Vec<OrderPolicy> {
    let key = StreamKey::new(seed).child(tag::ORDER);
    (0..count)
        .map(|k| match k {
            0 => OrderPolicy::Fifo,
            1 => OrderPolicy::LowestIndex,
            2 => OrderPolicy::reverse(volume),
            _ if k % 2 == 1 => OrderPolicy::Random {
                seed: key.at(k as u64),
            },
            _ => OrderPolicy::random_script(volume, key.at(k as u64)),
        })
        .collect()
}

/// Stabilizes copies of `initial` under each order and compares final
/// configurations and odometers against the first.
pub fn check_abelian_with(
    initial: &ReferenceArwState,
    orders: &[OrderPolicy],
    budget: u64,
) -> Result<AbelianReport> {
    if orders.is_empty() {
        return Err(Error::domain("need at least one order"));
    }
    let mut reference: Option<ReferenceArwState> = None;
    let mut mismatches = Vec::new();
    for (k, order) in orders.iter().enumerate() {
        let mut s = initial.clone();
        stabilize_reference(&mut s, order, budget)?;
        match &reference {
            None => reference = Some(s),
            Some(r) => {
                for x in r.geometry.sites() {
                    let i = x.index();
                    let mut diff = |field: &str, e: u64, g: u64| {
                        if e != g {
                            mismatches.push(AbelianMismatch {
                                order: k,
                                site: x,
                                field: field.to_string(),
                                expected: e,
                                got: g,
                            });
                        }
                    };
                    diff("count", r.counts[i] as u64, s.counts[i] as u64);
                    diff("asleep", r.asleep[i] as u64, s.asleep[i] as u64);
                    diff("odometer", r.odometer[i], s.odometer[i]);
                }
            }
        }
    }
    let m_a = reference.map_or(0, |r| r.on_a);
    Ok(AbelianReport {
        orders: orders.len(),
        identical: mismatches.is_empty(),
        m_a,
        mismatches,
    })
}

pub fn check_abelian(
    initial: &ReferenceArwState,
    num_orders: usize,
    order_seed: u64,
    budget: u64,
) -> Result<AbelianReport> {
    let orders = standard_orders(initial.geometry.volume(), num_orders, order_seed);
    check_abelian_with(initial, &orders, budget)
}
