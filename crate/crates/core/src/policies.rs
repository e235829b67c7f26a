//! Online allocation and speed policies.
//!
//! What a policy may observe is fixed by the view type it receives. A
//! non-clairvoyant view carries only job identifiers; a semi-clairvoyant
//! view adds the parallelism of each job's current phase. Neither exposes
//! remaining work or future phases.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{Assignment, Instance, JobId, PowerParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("job {job} is in a phase with parallelism {parallelism}; only sequential and fully-parallel phases are allowed")]
    ModelViolation { job: JobId, parallelism: f64 },
    #[error("policy requires a batched instance")]
    NotBatched,
    #[error("policy requires a non-empty set of active jobs")]
    NoActiveJobs,
    #[error("policy {policy} needs a {expected} view")]
    ViewMismatch {
        policy: &'static str,
        expected: Clairvoyance,
    },
    #[error("unknown policy `{0}` (expected nequi, uceq or pfirst)")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clairvoyance {
    NonClairvoyant,
    SemiClairvoyant,
}

impl fmt::Display for Clairvoyance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonClairvoyant => f.write_str("non-clairvoyant"),
            Self::SemiClairvoyant => f.write_str("semi-clairvoyant"),
        }
    }
}

/// Active job identifiers, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NonClairvoyantView {
    ids: Vec<JobId>,
}

impl NonClairvoyantView {
    pub fn new(mut ids: Vec<JobId>) -> Self {
        ids.sort_unstable();
        Self { ids }
    }

    pub fn ids(&self) -> &[JobId] {
        &self.ids
    }

    pub fn n_active(&self) -> usize {
        self.ids.len()
    }
}

/// Active jobs with their instantaneous parallelism, ascending by id.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiClairvoyantView {
    jobs: Vec<(JobId, f64)>,
}

impl SemiClairvoyantView {
    pub fn new(mut jobs: Vec<(JobId, f64)>) -> Self {
        jobs.sort_unstable_by_key(|(id, _)| *id);
        Self { jobs }
    }

    pub fn jobs(&self) -> &[(JobId, f64)] {
        &self.jobs
    }

    pub fn n_active(&self) -> usize {
        self.jobs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyView {
    NonClairvoyant(NonClairvoyantView),
    SemiClairvoyant(SemiClairvoyantView),
}

impl PolicyView {
    pub fn n_active(&self) -> usize {
        match self {
            Self::NonClairvoyant(v) => v.n_active(),
            Self::SemiClairvoyant(v) => v.n_active(),
        }
    }

    pub fn ids(&self) -> Vec<JobId> {
        match self {
            Self::NonClairvoyant(v) => v.ids.clone(),
            Self::SemiClairvoyant(v) => v.jobs.iter().map(|(id, _)| *id).collect(),
        }
    }
}

/// A scheduling policy. Decisions depend only on the view, so they stay
/// fixed between arrivals and phase completions.
pub trait Policy: Send + Sync {
    fn name(&self) -> &'static str;

    fn clairvoyance(&self) -> Clairvoyance;

    /// Rejects instances outside the policy's domain before simulation.
    fn check_instance(&self, _instance: &Instance) -> Result<(), PolicyError> {
        Ok(())
    }

    /// One assignment per active job, in view order.
    fn assign(
        &self,
        view: &PolicyView,
        params: &PowerParams,
    ) -> Result<Vec<Assignment>, PolicyError>;
}

/// Speed of the `j`-th (1-based) processor on the harmonic ladder.
pub fn ladder_speed(params: &PowerParams, j: usize) -> f64 {
    (1.0 / ((params.alpha() - 1.0) * params.harmonic_p() * j as f64)).powf(1.0 / params.alpha())
}

/// Non-uniform equipartition: `floor(P/n)` processors per job on a
/// harmonic speed ladder. With more jobs than processors the `P`
/// lowest-id jobs each get one top-of-ladder processor.
pub fn nequi(view: &NonClairvoyantView, params: &PowerParams) -> Vec<Assignment> {
    let n = view.n_active();
    if n == 0 {
        return Vec::new();
    }
    let p = params.processors() as usize;
    let share = p / n;
    if share == 0 {
        let top = ladder_speed(params, 1);
        return (0..n)
            .map(|i| Assignment::Discrete {
                speeds: if i < p { vec![top] } else { Vec::new() },
            })
            .collect();
    }
    let ladder: Vec<f64> = (1..=share).map(|j| ladder_speed(params, j)).collect();
    vec![Assignment::Discrete { speeds: ladder }; n]
}

/// Uniform conservative equipartition: `min(h, P/n)` processors, each at
/// the speed that makes the job draw exactly `1/(alpha-1)`.
pub fn uceq(view: &SemiClairvoyantView, params: &PowerParams) -> Vec<Assignment> {
    let n = view.n_active();
    if n == 0 {
        return Vec::new();
    }
    let fair = params.p() / n as f64;
    view.jobs()
        .iter()
        .map(|&(_, h)| {
            let count = h.min(fair);
            Assignment::Fluid {
                count,
                speed: params.balanced_speed(count),
            }
        })
        .collect()
}

/// Parallel-first: run one fully-parallel phase on all processors if any
/// exists, otherwise share `min(n, P)` processors equally among the
/// sequential phases. Total power is `1/(alpha-1)` either way.
pub fn pfirst(
    view: &SemiClairvoyantView,
    params: &PowerParams,
) -> Result<Vec<Assignment>, PolicyError> {
    let n = view.n_active();
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(&(job, parallelism)) = view
        .jobs()
        .iter()
        .find(|(_, h)| !(*h == 1.0 || h.is_infinite()))
    {
        return Err(PolicyError::ModelViolation { job, parallelism });
    }
    // view is sorted by id, so the first match is the lowest id
    if let Some(pos) = view.jobs().iter().position(|(_, h)| h.is_infinite()) {
        let p = params.p();
        let mut out = vec![Assignment::idle(); n];
        out[pos] = Assignment::Fluid {
            count: p,
            speed: params.balanced_speed(p),
        };
        return Ok(out);
    }
    let used = params.p().min(n as f64);
    let speed = params.balanced_speed(used);
    Ok(vec![
        Assignment::Fluid {
            count: used / n as f64,
            speed,
        };
        n
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Nequi,
    Uceq,
    PFirst,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Nequi, PolicyKind::Uceq, PolicyKind::PFirst];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nequi => "nequi",
            Self::Uceq => "uceq",
            Self::PFirst => "pfirst",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nequi" | "n-equi" => Ok(Self::Nequi),
            "uceq" | "u-ceq" => Ok(Self::Uceq),
            "pfirst" | "p-first" => Ok(Self::PFirst),
            other => Err(PolicyError::Unknown(other.to_string())),
        }
    }
}

impl Policy for PolicyKind {
    fn name(&self) -> &'static str {
        self.as_str()
    }

    fn clairvoyance(&self) -> Clairvoyance {
        match self {
            Self::Nequi => Clairvoyance::NonClairvoyant,
            Self::Uceq | Self::PFirst => Clairvoyance::SemiClairvoyant,
        }
    }

    fn check_instance(&self, instance: &Instance) -> Result<(), PolicyError> {
        if *self != Self::PFirst {
            return Ok(());
        }
        if !instance.is_batched() {
            return Err(PolicyError::NotBatched);
        }
        for job in instance.jobs() {
            if let Some(p) = job
                .phases()
                .iter()
                .find(|p| !(p.is_sequential() || p.is_fully_parallel()))
            {
                return Err(PolicyError::ModelViolation {
                    job: job.id(),
                    parallelism: p.parallelism(),
                });
            }
        }
        Ok(())
    }

    fn assign(
        &self,
        view: &PolicyView,
        params: &PowerParams,
    ) -> Result<Vec<Assignment>, PolicyError> {
        if view.n_active() == 0 {
            return Err(PolicyError::NoActiveJobs);
        }
        match (self, view) {
            (Self::Nequi, PolicyView::NonClairvoyant(v)) => Ok(nequi(v, params)),
            (Self::Uceq, PolicyView::SemiClairvoyant(v)) => Ok(uceq(v, params)),
            (Self::PFirst, PolicyView::SemiClairvoyant(v)) => pfirst(v, params),
            _ => Err(PolicyError::ViewMismatch {
                policy: self.name(),
                expected: self.clairvoyance(),
            }),
        }
    }
}
