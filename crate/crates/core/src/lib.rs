//! Exact solvers for the two-stage robust multi-mode resource-constrained
//! project scheduling problem under budgeted duration uncertainty.
//!
//! The first stage picks a processing mode per activity and a sufficient
//! selection of extra precedences; the second stage evaluates the
//! worst-case makespan when at most Γ activities deviate. Two exact methods
//! are provided: a compact MILP ([`compact`]) and a Benders' decomposition
//! ([`benders`]). [`oracle`] enumerates tiny instances for ground truth.

pub mod benders;
pub mod compact;
pub mod formulation;
pub mod generate;
pub mod heuristic;
pub mod instance;
pub mod milp;
pub mod network;
pub mod oracle;
pub mod psplib;

pub use instance::{Activity, Instance, Mode, ModeVector, Time};
pub use network::{Budget, ExtendedRelation, WorstCaseResult};
