//! Exact simulation and analysis of energy-aware scheduling for phased
//! parallel jobs on speed-scalable multiprocessors.
//!
//! Each processor running at speed `s` draws power `s^alpha` with
//! `alpha > 1`. Three online policies are provided:
//!
//! * N-EQUI, non-clairvoyant equipartition with a harmonic speed ladder;
//! * U-CEQ, semi-clairvoyant, allocating no more than a job's current
//!   parallelism at a uniform balanced speed;
//! * P-FIRST, semi-clairvoyant, for makespan plus energy on batched jobs
//!   made of sequential and fully-parallel phases.
//!
//! Closed-form lower bounds in [`baselines`] anchor every ratio the
//! [`analysis`] harness reports. [`adversarial`] has the lower-bound
//! instances, the speed-vector game and the analytic guarantee constants.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod engine;
pub mod model;
pub mod policies;

pub use engine::{metrics, simulate, Trace};
pub use model::{Assignment, Instance, Job, JobId, Metrics, Phase, PowerParams};
pub use policies::{Policy, PolicyKind};
