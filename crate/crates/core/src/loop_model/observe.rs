//! Step observers: event traces and metastability bookkeeping.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::torus::Site;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    Sleep,
    Loop { colour: u32, woken: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvent {
    /// Index of the step within the current stabilization call.
    pub step: u64,
    pub site: Site,
    /// Level-0 cluster being stabilized.
    pub cluster: usize,
    #[serde(flatten)]
    pub kind: StepKind,
    /// Whether `x*_C` of that cluster was active when the site was chosen.
    pub distinguished_was_active: bool,
    pub distinguished: Site,
    /// `|R ∩ C|` after the step.
    pub active_after: u32,
    pub distinguished_active_after: bool,
}

pub trait StepObserver {
    fn on_step(&mut self, event: &StepEvent);
}

/// Ignores everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoObserver;

impl StepObserver for NoObserver {
    #[inline]
    fn on_step(&mut self, _: &StepEvent) {}
}

impl<T: StepObserver + ?Sized> StepObserver for &mut T {
    fn on_step(&mut self, event: &StepEvent) {
        (**self).on_step(event)
    }
}

/// Keeps every event.
#[derive(Clone, Debug, Default)]
pub struct TraceRecorder {
    pub events: Vec<StepEvent>,
}

impl StepObserver for TraceRecorder {
    fn on_step(&mut self, event: &StepEvent) {
        self.events.push(*event);
    }
}

impl TraceRecorder {
    /// Steps where the distinguished vertex was active but another site was
    /// toppled.
    pub fn priority_violations(&self) -> Vec<StepEvent> {
        self.events
            .iter()
            .filter(|e| e.distinguished_was_active && e.site != e.distinguished)
            .copied()
            .collect()
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryExit {
    pub step: u64,
    pub active_after: u32,
    pub distinguished_asleep: bool,
}

/// Tracks visits to `B = {R : |R ∩ C| > m}` for one level-0 cluster.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetastabilityTracker {
    pub cluster: usize,
    pub threshold: u32,
    pub inside: bool,
    /// One plus the number of returns to `B`.
    pub visits: u64,
    pub exits: Vec<BoundaryExit>,
}

/// `⌊β |C|⌋`, guarded against `β |C|` landing a hair below an integer.
pub fn boundary_threshold(beta: f64, size: usize) -> u32 {
    let x = beta * size as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as u32
    } else {
        x.floor() as u32
    }
}

impl MetastabilityTracker {
    /// `initial_active` is `|R ∩ C|` before the first step.
    pub fn new(cluster: usize, beta: f64, size: usize, initial_active: u32) -> Self {
        let threshold = boundary_threshold(beta, size);
        let inside = initial_active > threshold;
        MetastabilityTracker {
            cluster,
            threshold,
            inside,
            visits: inside as u64,
            exits: Vec::new(),
        }
    }

    /// Whether every exit from `B` landed on `|R ∩ C| = m` with `x*_C` asleep.
    pub fn exits_on_boundary(&self) -> bool {
        self.exits
            .iter()
            .all(|e| e.active_after == self.threshold && e.distinguished_asleep)
    }
}

impl StepObserver for MetastabilityTracker {
    fn on_step(&mut self, e: &StepEvent) {
        if e.cluster != self.cluster {
            return;
        }
        let now = e.active_after > self.threshold;
        if self.inside && !now {
            self.exits.push(BoundaryExit {
                step: e.step,
                active_after: e.active_after,
                distinguished_asleep: !e.distinguished_active_after,
            });
        } else if !self.inside && now {
            self.visits += 1;
        }
        self.inside = now;
    }
}

/// Forwards events to two observers.
pub struct Both<A, B>(pub A, pub B);

impl<A: StepObserver, B: StepObserver> StepObserver for Both<A, B> {
    fn on_step(&mut self, e: &StepEvent) {
        self.0.on_step(e);
        self.1.on_step(e);
    }
}
