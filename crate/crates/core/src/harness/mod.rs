//! Seeded trial sampling, frequency estimation and the CHSH violation
//! classifier.

mod classify;
mod estimate;
pub mod rng;
mod trial;

use thiserror::Error;

use crate::models::{ModelError, Setting};
use crate::observers::{ObserverError, Stage};
use crate::prob::ProbError;

pub use classify::{classify_violation, Classification, ViolationReport};
pub use estimate::{
    estimate_behavior, estimate_chsh, run_experiment, run_range, BehaviorEstimate, ChshEstimate, Dataset,
};
pub use trial::{Allocation, QConfig, ReceptionTimes, Replay, RunTrace, TrialContext, TrialRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("no data for setting pair (θa = {x}, θb = {y})")]
    MissingData { x: Setting, y: Setting },
    #[error("invalid plan: {0}")]
    InvalidPlan(alloc::string::String),
    #[error("stage {0} is not in the trace")]
    StageNotInTrace(Stage),
    #[error("pooled data of trial {0} differs from the sampled values")]
    DataMismatch(u64),
}

impl HarnessError {
    /// True for a realism violation raised while pooling or receiving.
    pub fn is_realism_violation(&self) -> bool {
        matches!(self, HarnessError::Observer(ObserverError::RealismViolation { .. }))
    }
}
