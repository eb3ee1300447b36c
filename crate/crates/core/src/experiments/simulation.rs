//! Monte Carlo drivers: loop counts of singletons, metastability traces,
//! activity sweeps of the reference model and size scaling of `H(C)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arw::{random_configuration, stabilize_reference, OrderPolicy, ReferenceArwState};
use crate::error::{Error, Result};
use crate::hierarchy::DormitoryHierarchy;
use crate::loop_model::{
    stabilize_level0, stabilize_recursive, BoundaryExit, ClusterView, IndependentStacks,
    LoopModelState, LowestIndex, MetastabilityTracker, NearbySleepers, NoObserver,
    StabilizationRecord, TopplingProcedure,
};
use crate::rng::{cell_seed, tag, StreamKey};
use crate::stats::{linear_regression, mean_se, proportion, LinearFit, MeanEstimate};
use crate::torus::{Site, SiteSet, TorusGeometry};

/// The toppling procedures shipped with the crate, as plain data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProcedureChoice {
    LowestIndex,
    NearbySleepers { r: Option<u32>, v: u64, beta: f64 },
}

impl TopplingProcedure for ProcedureChoice {
    fn select(&mut self, view: &ClusterView<'_>) -> Site {
        match *self {
            ProcedureChoice::LowestIndex => LowestIndex.select(view),
            ProcedureChoice::NearbySleepers { r, v, beta } => {
                NearbySleepers { r, v, beta }.select(view)
            }
        }
    }
}

/// The cube `{0..k}^d` anchored at the origin, sorted.
pub fn square_cluster(g: &TorusGeometry, k: u32) -> Result<Vec<Site>> {
    if k == 0 || k > g.n() {
        return Err(Error::domain(format!(
            "cube side {k} does not fit in a torus of side {}",
            g.n()
        )));
    }
    let d = g.d() as usize;
    let mut out = Vec::new();
    let mut c = vec![0i64; d];
    loop {
        out.push(g.site_at(&c)?);
        let mut axis = 0;
        loop {
            if axis == d {
                out.sort_unstable();
                return Ok(out);
            }
            c[axis] += 1;
            if c[axis] < k as i64 {
                break;
            }
            c[axis] = 0;
            axis += 1;
        }
    }
}

fn trivial_on(g: &TorusGeometry, sites: &[Site]) -> Result<DormitoryHierarchy> {
    let a = SiteSet::from_sites(g.volume(), sites.iter().copied());
    DormitoryHierarchy::trivial(g.clone(), a, 1, g.n() as u64)
}

/// `1 + L(C, 0)` for a singleton cluster, over `runs` independent stacks.
pub fn singleton_loop_counts(
    g: &TorusGeometry,
    lambda: f64,
    runs: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let hier = trivial_on(g, &[Site(0)])?;
    let root = StreamKey::new(seed).child(tag::CELL);
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut source = IndependentStacks::new(g.clone(), lambda, root.at(i as u64));
            let mut state = LoopModelState::fully_active(&hier);
            let rec = stabilize_level0(
                &mut state,
                &hier,
                &mut source,
                &mut LowestIndex,
                &mut NoObserver,
                0,
                u64::MAX,
            )?;
            Ok(1 + rec.loops_of_colour(0))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub seed: u64,
    pub record: StabilizationRecord,
    /// `⌊β |C|⌋`.
    pub threshold: u32,
    /// `N_B`: one plus the number of returns to `B`.
    pub n_b: u64,
    pub exits: Vec<BoundaryExit>,
    pub exits_on_boundary: bool,
}

/// Stabilizes level-0 cluster `c` from the fully active configuration while
/// tracking visits to `B = {R : |R ∩ C| > β|C|}`. Running out of budget is
/// reported in the record, with the trace up to that point.
#[allow(clippy::too_many_arguments)]
pub fn metastability_trace(
    hier: &DormitoryHierarchy,
    c: usize,
    procedure: ProcedureChoice,
    beta: f64,
    lambda: f64,
    seed: u64,
    budget: u64,
) -> Result<TraceSummary> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("β must lie in (0, 1), got {beta}")));
    }
    let size = hier
        .level(0)
        .get(c)
        .ok_or_else(|| Error::domain(format!("no level-0 cluster {c}")))?
        .len();
    let mut state = LoopModelState::fully_active(hier);
    let mut tracker = MetastabilityTracker::new(c, beta, size, state.active_in(0, c));
    let mut source = IndependentStacks::new(hier.geometry().clone(), lambda, seed);
    let mut proc = procedure;
    let record = match stabilize_level0(
        &mut state,
        hier,
        &mut source,
        &mut proc,
        &mut tracker,
        c,
        budget,
    ) {
        Ok(r) => r,
        Err(Error::LoopBudget(r)) => *r,
        Err(e) => return Err(e),
    };
    Ok(TraceSummary {
        seed,
        record,
        threshold: tracker.threshold,
        n_b: tracker.visits,
        exits_on_boundary: tracker.exits_on_boundary(),
        exits: tracker.exits,
    })
}

/// One reference stabilization of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub mu: f64,
    pub seed: u64,
    pub particles: usize,
    /// Instructions consumed on `A`; a lower bound when `exceeded`.
    pub m_a: u64,
    pub total_topplings: u64,
    pub exceeded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub mu: f64,
    pub particles: usize,
    pub runs: usize,
    pub exceeded: u64,
    pub exceed_rate: MeanEstimate,
    /// `M_A` over the runs that finished.
    pub m_a_completed: MeanEstimate,
    /// Some run hit the budget, so `m_a_completed` is biased low.
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    pub cells: Vec<SweepCell>,
}

/// For each density `μ`, stabilizes `seeds` configurations `η = 1_A` with
/// `A` uniform among sets of `⌈μ n^d⌉` sites, each settling on its own `A`.
pub fn activity_sweep(
    d: u32,
    n: u32,
    lambda: f64,
    mu_grid: &[f64],
    seeds: usize,
    budget: u64,
    master_seed: u64,
) -> Result<SweepResult> {
    let g = TorusGeometry::new(n, d)?;
    for &mu in mu_grid {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::domain(format!(
                "density must lie in (0, 1], got {mu}"
            )));
        }
    }
    let full = SiteSet::full(g.volume());
    let cells: Vec<(usize, usize)> = (0..mu_grid.len())
        .flat_map(|m| (0..seeds).map(move |s| (m, s)))
        .collect();
    let runs: Vec<SweepRun> = cells
        .par_iter()
        .map(|&(m, s)| -> Result<SweepRun> {
            let mu = mu_grid[m];
            let seed = cell_seed(master_seed, (m * seeds + s) as u64);
            let particles = ((mu * g.volume() as f64) - 1e-9).ceil().max(0.0) as usize;
            let counts = random_configuration(&full, particles, seed)?;
            let a = SiteSet::from_sites(g.volume(), g.sites().filter(|x| counts[x.index()] > 0));
            let mut state = ReferenceArwState::new(g.clone(), a, lambda, seed, counts)?;
            let exceeded = match stabilize_reference(&mut state, &OrderPolicy::Fifo, budget) {
                Ok(_) => false,
                Err(e) if e.is_budget() => true,
                Err(e) => return Err(e),
            };
            Ok(SweepRun {
                mu,
                seed,
                particles,
                m_a: state.m_a(),
                total_topplings: state.total_topplings(),
                exceeded,
            })
        })
        .collect::<Result<_>>()?;
    let cells = mu_grid
        .iter()
        .enumerate()
        .map(|(m, &mu)| {
            let rs = &runs[m * seeds..(m + 1) * seeds];
            let exceeded = rs.iter().filter(|r| r.exceeded).count() as u64;
            let done: Vec<f64> = rs
                .iter()
                .filter(|r| !r.exceeded)
                .map(|r| r.m_a as f64)
                .collect();
            SweepCell {
                mu,
                particles: rs.first().map_or(0, |r| r.particles),
                runs: rs.len(),
                exceeded,
                exceed_rate: proportion(exceeded, rs.len() as u64),
                m_a_completed: mean_se(&done),
                censored: exceeded > 0,
            }
        })
        .collect();
    Ok(SweepResult { runs, cells })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub size: usize,
    pub runs: usize,
    /// Runs that hit the budget; they enter the mean at the budget value.
    pub censored: usize,
    pub mean_h: MeanEstimate,
    pub ln_mean_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    pub points: Vec<ScalingPoint>,
    /// `ln(mean H)` against `|C|`.
    pub fit: LinearFit,
    /// With censoring the slope is only a lower bound.
    pub censored: bool,
}

/// Fits `ln(mean H(C))` against `|C|` for a family of clusters, each
/// stabilized alone (trivial hierarchy) from fully active.
pub fn scaling_fit(
    family: &[(TorusGeometry, Vec<Site>)],
    lambda: f64,
    runs: usize,
    procedure: ProcedureChoice,
    budget: u64,
    seed: u64,
) -> Result<ScalingReport> {
    if family.len() < 2 || runs == 0 {
        return Err(Error::domain(
            "scaling needs two or more clusters and at least one run",
        ));
    }
    let root = StreamKey::new(seed).child(tag::CELL);
    let mut points = Vec::with_capacity(family.len());
    for (f, (g, sites)) in family.iter().enumerate() {
        let hier = trivial_on(g, sites)?;
        let key = root.child(f as u64);
        let hs: Vec<(u64, bool)> = (0..runs)
            .into_par_iter()
            .map(|i| {
                let mut source = IndependentStacks::new(g.clone(), lambda, key.at(i as u64));
                let mut state = LoopModelState::fully_active(&hier);
                let mut proc = procedure;
                match stabilize_recursive(
                    &mut state,
                    &hier,
                    &mut source,
                    &mut proc,
                    &mut NoObserver,
                    0,
                    0,
                    budget,
                ) {
                    Ok(r) => Ok((r.total_steps, false)),
                    Err(Error::LoopBudget(r)) => Ok((r.total_steps, true)),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let values: Vec<f64> = hs.iter().map(|&(h, _)| h as f64).collect();
        let mean_h = mean_se(&values);
        points.push(ScalingPoint {
            size: sites.len(),
            runs,
            censored: hs.iter().filter(|&&(_, c)| c).count(),
            mean_h,
            ln_mean_h: mean_h.mean.ln(),
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.size as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.ln_mean_h).collect();
    let fit = linear_regression(&x, &y)?;
    let censored = points.iter().any(|p| p.censored > 0);
    Ok(ScalingReport {
        lambda,
        points,
        fit,
        censored,
    })
}
