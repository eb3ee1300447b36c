//! Running the loop model on the reference model's own instruction stacks.
//!
//! Start from one awake particle per site of `A`. Each loop-model step at
//! an active `x` topples the reference model at `x`. A sleep instruction
//! is an `x`-sleep. A jump starts an excursion: the moving particle is
//! toppled wherever it lands (there it shares the site with the resident,
//! so sleep instructions are ignored) until it is back at `x`. The sites
//! it passed through form the loop `Γ`, and the colour comes from an
//! independent stream. The reference model wakes every resident on the
//! path while the loop model only wakes `Γ ∩ w(x, j)`, so the loop-model
//! active set stays inside the reference active set and every loop-model
//! step is a legal reference toppling. Finishing the reference
//! stabilization afterwards gives `H(A_J) ≤ M_A` on every path.

use serde::{Deserialize, Serialize};

use crate::arw::{stabilize_reference, OrderPolicy, ReferenceArwState, ToppleOutcome};
use crate::error::{Error, Result};
use crate::hierarchy::DormitoryHierarchy;
use crate::loop_model::{
    colour_from_word, stabilize_recursive, LoopModelState, NoObserver, StabilizationRecord,
    StepSource, TopplingProcedure,
};
use crate::rng::{tag, StreamKey};
use crate::torus::Site;
use crate::walk::DEFAULT_WALK_CAP;

/// A [`StepSource`] that reads from a reference model.
pub struct CoupledSource<'a> {
    reference: &'a mut ReferenceArwState,
    key_j: StreamKey,
    pending: Option<Site>,
    walk_cap: u64,
}

impl<'a> CoupledSource<'a> {
    pub fn new(reference: &'a mut ReferenceArwState, seed: u64) -> Self {
        CoupledSource {
            reference,
            key_j: StreamKey::new(seed).child(tag::COLOUR),
            pending: None,
            walk_cap: DEFAULT_WALK_CAP,
        }
    }

    pub fn with_walk_cap(mut self, cap: u64) -> Self {
        self.walk_cap = cap;
        self
    }
}

impl StepSource for CoupledSource<'_> {
    fn instruction(&mut self, x: Site, _h: u64) -> Result<bool> {
        match self.reference.topple(x)? {
            ToppleOutcome::FellAsleep => Ok(true),
            ToppleOutcome::SleepIgnored => Err(Error::domain(format!(
                "site {} carried more than one particle between steps",
                x.0
            ))),
            ToppleOutcome::Jumped { to, .. } => {
                self.pending = Some(to);
                Ok(false)
            }
        }
    }

    fn colour(&mut self, x: Site, l: u64) -> u32 {
        colour_from_word(self.key_j.child(x.0 as u64).at(l))
    }

    /// The walk always runs: it consumes reference instructions whether or
    /// not the loop model needs the visits.
    fn excursion(
        &mut self,
        x: Site,
        _l: u64,
        _j: u32,
        _needed: bool,
        visit: &mut dyn FnMut(Site),
    ) -> Result<()> {
        let mut pos = self
            .pending
            .take()
            .ok_or_else(|| Error::domain("excursion without a preceding jump"))?;
        let mut steps = 1u64;
        while pos != x {
            visit(pos);
            loop {
                if steps >= self.walk_cap {
                    return Err(Error::WalkBudget {
                        origin: x,
                        steps,
                        visited: 0,
                    });
                }
                steps += 1;
                if let ToppleOutcome::Jumped { to, .. } = self.reference.topple(pos)? {
                    pos = to;
                    break;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingOutcome {
    pub m_a: u64,
    pub h_aj: u64,
    pub dominates: bool,
    /// Reference instructions consumed off `A`.
    pub off_a: u64,
    pub record: StabilizationRecord,
}

/// Runs the loop model for `A_J` on the reference stacks of `seed`, then
/// completes the reference stabilization with a FIFO order.
///
/// `budget` caps loop-model steps and, separately, the reference topplings
/// of the completion phase.
pub fn couple_and_compare(
    hier: &DormitoryHierarchy,
    lambda: f64,
    seed: u64,
    procedure: &mut dyn TopplingProcedure,
    budget: u64,
) -> Result<CouplingOutcome> {
    let g = hier.geometry().clone();
    let a = hier.settling_set().clone();
    let mut reference = ReferenceArwState::one_per_site(g, a, lambda, seed)?;
    let mut state = LoopModelState::fully_active(hier);
    let record = {
        let mut source = CoupledSource::new(&mut reference, seed);
        stabilize_recursive(
            &mut state,
            hier,
            &mut source,
            procedure,
            &mut NoObserver,
            hier.top(),
            0,
            budget,
        )?
    };
    for x in state.active_set().iter() {
        if !reference.is_active(x) {
            return Err(Error::domain(format!(
                "site {} is active in the loop model only",
                x.0
            )));
        }
    }
    stabilize_reference(&mut reference, &OrderPolicy::Fifo, budget)?;
    let m_a = reference.m_a();
    let h_aj = record.total_steps;
    Ok(CouplingOutcome {
        m_a,
        h_aj,
        dominates: h_aj <= m_a,
        off_a: reference.total_topplings() - m_a,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::DormitoryHierarchy;
    use crate::loop_model::LowestIndex;
    use crate::torus::{SiteSet, TorusGeometry};

    #[test]
    fn singleton_counts_agree() {
        let g = TorusGeometry::new(5, 2).unwrap();
        let a = SiteSet::from_sites(25, [Site(7)]);
        let h = DormitoryHierarchy::trivial(g, a, 1, 1).unwrap();
        for seed in 0..50 {
            let out = couple_and_compare(&h, 0.7, seed, &mut LowestIndex, 1 << 30).unwrap();
            assert_eq!(out.h_aj, out.m_a);
        }
    }

    #[test]
    fn full_cluster_dominated() {
        let g = TorusGeometry::new(4, 2).unwrap();
        let a = SiteSet::from_sites(16, (0..8).map(Site));
        let h = DormitoryHierarchy::trivial(g, a, 1, 4).unwrap();
        for seed in 0..20 {
            let out = couple_and_compare(&h, 2.0, seed, &mut LowestIndex, 1 << 30).unwrap();
            assert!(out.dominates, "{out:?}");
        }
    }
}
