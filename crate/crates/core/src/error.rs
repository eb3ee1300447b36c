use thiserror::Error;

use crate::loop_model::StabilizationRecord;
use crate::torus::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("site {site} is outside a torus with {volume} sites")]
    InvalidSite { site: usize, volume: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// A toppling was requested at a site carrying no active particle.
    #[error("illegal toppling at site {}: no active particle", .0 .0)]
    IllegalToppling(Site),

    /// An excursion did not return to its origin within the walk step cap.
    #[error("walk from site {} exceeded {steps} steps ({visited} sites visited so far)", origin.0)]
    WalkBudget {
        origin: Site,
        steps: u64,
        visited: usize,
    },

    /// Reference stabilization ran out of budget. The state keeps the
    /// partial odometer.
    #[error(
        "reference stabilization exceeded its budget after {consumed} topplings ({on_a} on A)"
    )]
    ReferenceBudget { consumed: u64, on_a: u64 },

    /// Loop-model stabilization ran out of budget; carries the partial record.
    #[error("loop stabilization exceeded its budget after {} steps", .0.total_steps)]
    LoopBudget(Box<StabilizationRecord>),

    #[error("hierarchy construction failed: {0}")]
    ConstructionFailed(String),

    #[error("toppling procedure violated its contract: {0}")]
    InvalidProcedure(String),

    #[error("invalid sampler: {0}")]
    InvalidSampler(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::WalkBudget { .. } | Error::ReferenceBudget { .. } | Error::LoopBudget(_)
        )
    }
}
