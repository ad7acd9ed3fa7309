//! Permutation optimisation over noisy objectives.
//!
//! A first phase sweeps each element through every rank of the incumbent and
//! induces pairwise ranking constraints from statistically distinguishable
//! neighbours. A second phase anneals over insertion moves, steered away from
//! assignments that violate those constraints.

pub mod annealer;
pub mod climber;
pub mod constraint;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod perm;
pub mod seed;
pub mod trace;

pub use annealer::{
    acceptance_probability, run_phase2, Phase2Config, Phase2Result, TemperatureSchedule,
};
pub use climber::{run_phase1, InductionScope, Phase1Config, Phase1Result};
pub use constraint::{AddOutcome, ConstraintGraph, Evidence, RankConstraint, TestId};
pub use error::{Error, Result};
pub use evaluation::{FitnessEstimate, Oracle};
pub use perm::{Assignment, Element, MoveDescriptor, MoveKind, Rank};
pub use trace::TraceRecord;
