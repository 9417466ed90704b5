//! Two-observer Bell scenarios with per-observer probability ledgers.
//!
//! Every observer keeps a finite joint distribution over the propositions of
//! the experiment (outcomes `±a`, `±b` and settings `θa`, `θb`). Locally
//! received events enter the ledger as *factual* conditioners; propositions
//! about the distant wing can only be *posited*, and are tagged
//! counterfactual. On top of that the crate provides the usual Bell
//! machinery (behaviors, CHSH, no-signaling, the local polytope in the
//! 2-2-2 scenario), a 1+1D light-cone schedule, and a seeded trial sampler.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod angle;
pub mod harness;
pub mod models;
pub mod observers;
pub mod prob;
pub mod spacetime;

pub use angle::Angle;
pub use models::{Behavior, ChshSettings, LhvModel, Outcome, Setting};
pub use observers::{ObserverState, QUncertainty, Stage};
pub use prob::{Modality, TaggedJoint, Value, Variable};
pub use spacetime::{Party, Schedule, ScheduleConfig, SpacetimeEvent};

/// Tolerance for normalization and entrywise table comparisons.
pub const NORM_TOL: f64 = 1e-12;

/// Tolerance used by the CHSH facet test of the local polytope.
pub const FACET_TOL: f64 = 1e-9;
