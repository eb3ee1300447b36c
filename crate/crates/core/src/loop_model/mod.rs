//! Coloured-loop representation of the ARW model constrained to settle on
//! `A`, with recursive ping-pong stabilization along a dormitory hierarchy.
//!
//! The configuration is the set `R ⊆ A` of active sites (every site of `A`
//! always carries exactly one particle). A step at an active `x` is either
//! an `x`-sleep or an `x`-loop of colour `j`, which wakes the sleepers of
//! `Γ(x, ℓ, j) ∩ w(x, j)`.

mod observe;
mod procedure;
mod source;

pub use observe::{
    boundary_threshold, Both, BoundaryExit, MetastabilityTracker, NoObserver, StepEvent, StepKind,
    StepObserver, TraceRecorder,
};
pub use procedure::{
    select_topple_site, sleeper_target, sleepers_near, ClusterView, LowestIndex, NearbySleepers,
    TopplingProcedure,
};
pub use source::{colour_from_word, IndependentStacks, StepSource};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{ClusterOrigin, DormitoryHierarchy, WTarget};
use crate::torus::{Site, SiteSet};

/// `(R, h, ℓ)` together with active counts for every cluster of every level.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopModelState {
    r: SiteSet,
    h: Vec<u64>,
    l: Vec<u64>,
    active: Vec<Vec<u32>>,
}

impl LoopModelState {
    pub fn new(hier: &DormitoryHierarchy, r: SiteSet) -> Result<Self> {
        if !r.is_subset(hier.settling_set()) {
            return Err(Error::domain("active set is not contained in A"));
        }
        let volume = hier.geometry().volume();
        let mut active: Vec<Vec<u32>> = hier.levels().iter().map(|lv| vec![0; lv.len()]).collect();
        for x in r.iter() {
            for (j, counts) in active.iter_mut().enumerate() {
                if let Some(c) = hier.cluster_id(j, x) {
                    counts[c] += 1;
                }
            }
        }
        Ok(LoopModelState {
            r,
            h: vec![0; volume],
            l: vec![0; volume],
            active,
        })
    }

    /// Every site of `A` active, odometers at zero.
    pub fn fully_active(hier: &DormitoryHierarchy) -> Self {
        Self::new(hier, hier.settling_set().clone()).expect("A is a subset of itself")
    }

    pub fn active_set(&self) -> &SiteSet {
        &self.r
    }

    pub fn is_active(&self, x: Site) -> bool {
        self.r.contains(x)
    }

    pub fn h(&self) -> &[u64] {
        &self.h
    }

    pub fn l(&self) -> &[u64] {
        &self.l
    }

    /// `|R ∩ C|` for cluster `c` of level `j`.
    pub fn active_in(&self, j: usize, c: usize) -> u32 {
        self.active[j][c]
    }

    fn set_active(&mut self, hier: &DormitoryHierarchy, x: Site, on: bool) -> bool {
        let changed = if on {
            self.r.insert(x)
        } else {
            self.r.remove(x)
        };
        if changed {
            for (j, counts) in self.active.iter_mut().enumerate() {
                if let Some(c) = hier.cluster_id(j, x) {
                    if on {
                        counts[c] += 1;
                    } else {
                        counts[c] -= 1;
                    }
                }
            }
        }
        changed
    }

    /// Number of sites of `w` currently asleep.
    fn asleep_in_target(&self, hier: &DormitoryHierarchy, t: WTarget) -> u64 {
        match t {
            WTarget::Empty => 0,
            WTarget::Base(c) => {
                hier.level(0)[c as usize].len() as u64 - self.active[0][c as usize] as u64
            }
            WTarget::Ring {
                level,
                outer,
                inner,
            } => {
                let j = level as usize;
                let size =
                    hier.level(j + 1)[outer as usize].len() - hier.level(j)[inner as usize].len();
                let act = self.active[j + 1][outer as usize] - self.active[j][inner as usize];
                (size - act as usize) as u64
            }
        }
    }
}

/// Outcome of one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepResult {
    Sleep,
    Loop { colour: u32, woken: u32 },
}

/// The step-toppling operator `Φ_x`.
pub fn step_topple(
    state: &mut LoopModelState,
    hier: &DormitoryHierarchy,
    source: &mut dyn StepSource,
    x: Site,
) -> Result<StepResult> {
    if !state.is_active(x) {
        return Err(Error::IllegalToppling(x));
    }
    let i = x.index();
    let h = state.h[i];
    if source.instruction(x, h)? {
        state.h[i] = h + 1;
        state.set_active(hier, x, false);
        return Ok(StepResult::Sleep);
    }
    let l = state.l[i];
    let j = source.colour(x, l);
    let target = hier.w_target(x, j as usize);
    let needed = state.asleep_in_target(hier, target) > 0;
    let mut woken = 0u32;
    let mut wake = Vec::new();
    source.excursion(x, l, j, needed, &mut |y| {
        if needed && hier.w_contains(target, y) && !state.r.contains(y) {
            wake.push(y);
        }
    })?;
    for y in wake {
        if state.set_active(hier, y, true) {
            woken += 1;
        }
    }
    state.h[i] = h + 1;
    state.l[i] = l + 1;
    Ok(StepResult::Loop { colour: j, woken })
}

/// Counters of one stabilization call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizationRecord {
    pub level: usize,
    pub cluster: usize,
    pub distinguished: Site,
    /// `H(C)`: sleeps plus loops at all sites.
    pub total_steps: u64,
    /// `S(C)`: sleeps at `x*_C`.
    pub sleeps: u64,
    /// `L(C)`: loops at `x*_C`.
    pub loops: u64,
    /// `L(C, k)` indexed by colour `k`.
    pub loops_by_colour: Vec<u64>,
    /// Alternations of the top-level ping-pong rally.
    pub pingpong_rounds: u64,
    pub budget: u64,
    pub budget_exhausted: bool,
}

impl StabilizationRecord {
    /// `L(C, k)`.
    pub fn loops_of_colour(&self, k: usize) -> u64 {
        self.loops_by_colour.get(k).copied().unwrap_or(0)
    }
}

enum Stop {
    Budget,
    Fail(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Fail(e)
    }
}

struct Runner<'a> {
    hier: &'a DormitoryHierarchy,
    state: &'a mut LoopModelState,
    source: &'a mut dyn StepSource,
    procedure: &'a mut dyn TopplingProcedure,
    observer: &'a mut dyn StepObserver,
    budget: u64,
    steps: u64,
    watched: Site,
    watched_colours: Vec<u64>,
}

impl Runner<'_> {
    fn level0(&mut self, c: usize) -> std::result::Result<(), Stop> {
        let hier = self.hier;
        let cluster = &hier.level(0)[c];
        let xs = cluster.distinguished;
        while self.state.active[0][c] > 0 {
            if self.steps >= self.budget {
                return Err(Stop::Budget);
            }
            let count = self.state.active[0][c] as usize;
            let view = ClusterView {
                geometry: hier.geometry(),
                cluster,
                active: &self.state.r,
                active_count: count,
            };
            let x = self.procedure.select(&view);
            let xs_active = self.state.r.contains(xs);
            if !self.state.r.contains(x) || hier.cluster_id(0, x) != Some(c) {
                return Err(Error::InvalidProcedure(format!(
                    "selected site {} is not an active site of the cluster",
                    x.0
                ))
                .into());
            }
            if xs_active && x != xs {
                return Err(Error::InvalidProcedure(format!(
                    "selected site {} while the distinguished vertex {} was active",
                    x.0, xs.0
                ))
                .into());
            }
            let res = step_topple(self.state, hier, self.source, x)?;
            let kind = match res {
                StepResult::Sleep => StepKind::Sleep,
                StepResult::Loop { colour, woken } => {
                    if x == self.watched {
                        let k = colour as usize;
                        if self.watched_colours.len() <= k {
                            self.watched_colours.resize(k + 1, 0);
                        }
                        self.watched_colours[k] += 1;
                    }
                    StepKind::Loop { colour, woken }
                }
            };
            self.observer.on_step(&StepEvent {
                step: self.steps,
                site: x,
                cluster: c,
                kind,
                distinguished_was_active: xs_active,
                distinguished: xs,
                active_after: self.state.active[0][c],
                distinguished_active_after: self.state.r.contains(xs),
            });
            self.steps += 1;
        }
        Ok(())
    }

    /// Returns the number of ping-pong alternations at this cluster.
    fn stab(&mut self, j: usize, c: usize) -> std::result::Result<u64, Stop> {
        let mut j = j;
        let mut c = c;
        // Kept clusters are stabilized exactly like their previous copy.
        while let ClusterOrigin::Kept(p) = self.hier.level(j)[c].origin {
            j -= 1;
            c = p;
        }
        match self.hier.level(j)[c].origin {
            ClusterOrigin::Base => {
                self.level0(c)?;
                Ok(0)
            }
            ClusterOrigin::Merged(a, b) => {
                let mut rounds = 0;
                while self.state.active[j][c] > 0 {
                    rounds += 1;
                    self.stab(j - 1, a)?;
                    if self.state.active[j][c] == 0 {
                        break;
                    }
                    self.stab(j - 1, b)?;
                }
                Ok(rounds)
            }
            ClusterOrigin::Kept(_) => unreachable!("kept origins were followed above"),
            ClusterOrigin::Irregular => {
                Err(Error::domain(format!("cluster {c} of level {j} has no valid origin")).into())
            }
        }
    }
}

/// `Stab_C` for cluster `c` of level `j`, continuing from the current
/// state. On budget exhaustion the error carries the partial record.
#[allow(clippy::too_many_arguments)]
pub fn stabilize_recursive(
    state: &mut LoopModelState,
    hier: &DormitoryHierarchy,
    source: &mut dyn StepSource,
    procedure: &mut dyn TopplingProcedure,
    observer: &mut dyn StepObserver,
    j: usize,
    c: usize,
    budget: u64,
) -> Result<StabilizationRecord> {
    if j > hier.top() || c >= hier.level(j).len() {
        return Err(Error::domain(format!("no cluster {c} at level {j}")));
    }
    let xs = hier.level(j)[c].distinguished;
    let (h0, l0) = (state.h[xs.index()], state.l[xs.index()]);
    let mut runner = Runner {
        hier,
        state,
        source,
        procedure,
        observer,
        budget,
        steps: 0,
        watched: xs,
        watched_colours: Vec::new(),
    };
    let outcome = runner.stab(j, c);
    let steps = runner.steps;
    let colours = std::mem::take(&mut runner.watched_colours);
    let loops = state.l[xs.index()] - l0;
    let record = |rounds: u64, exhausted: bool| StabilizationRecord {
        level: j,
        cluster: c,
        distinguished: xs,
        total_steps: steps,
        sleeps: state.h[xs.index()] - h0 - loops,
        loops,
        loops_by_colour: colours.clone(),
        pingpong_rounds: rounds,
        budget,
        budget_exhausted: exhausted,
    };
    match outcome {
        Ok(rounds) => Ok(record(rounds, false)),
        Err(Stop::Budget) => Err(Error::LoopBudget(Box::new(record(0, true)))),
        Err(Stop::Fail(e)) => Err(e),
    }
}

/// `Stab_C` for a level-0 cluster.
pub fn stabilize_level0(
    state: &mut LoopModelState,
    hier: &DormitoryHierarchy,
    source: &mut dyn StepSource,
    procedure: &mut dyn TopplingProcedure,
    observer: &mut dyn StepObserver,
    c: usize,
    budget: u64,
) -> Result<StabilizationRecord> {
    stabilize_recursive(state, hier, source, procedure, observer, 0, c, budget)
}

/// `H(A_J)` and friends: stabilizes the top cluster from the fully active
/// configuration.
pub fn stabilize_hierarchy(
    hier: &DormitoryHierarchy,
    source: &mut dyn StepSource,
    procedure: &mut dyn TopplingProcedure,
    observer: &mut dyn StepObserver,
    budget: u64,
) -> Result<(LoopModelState, StabilizationRecord)> {
    let mut state = LoopModelState::fully_active(hier);
    let rec = stabilize_recursive(
        &mut state,
        hier,
        source,
        procedure,
        observer,
        hier.top(),
        0,
        budget,
    )?;
    Ok((state, rec))
}
