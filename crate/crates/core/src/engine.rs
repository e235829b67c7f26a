//! Exact event-driven simulation.
//!
//! Policies only change their decision when a job arrives or finishes a
//! phase, so each segment between events runs at constant rates and the
//! next event time is solved for directly.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{sum_compensated, Assignment, CompensatedSum, Instance, JobId, Metrics};
use crate::policies::{
    Clairvoyance, NonClairvoyantView, Policy, PolicyError, PolicyView, SemiClairvoyantView,
};

/// Completions closer than this to the segment end are treated as simultaneous.
pub const EVENT_TOLERANCE: f64 = 1e-12;

/// Slack allowed on `sum of allocated counts <= P`.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("no active job can progress and no arrival is pending at t = {time}")]
    NonTermination { time: f64 },
    #[error("policy allocated {allocated} processors at t = {time}, only {available} exist")]
    CapacityViolation {
        time: f64,
        allocated: f64,
        available: u32,
    },
    #[error("policy returned {got} assignments for {expected} active jobs")]
    AssignmentCount { expected: usize, got: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Full-information snapshot of an active job, handed to offline deciders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveJob {
    pub id: JobId,
    pub phase: usize,
    pub parallelism: f64,
    pub remaining: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEntry {
    pub job: JobId,
    pub phase: usize,
    pub assignment: Assignment,
    pub rate: f64,
    pub power: f64,
}

/// An interval with constant assignments. Entries cover every active job,
/// including ones held at rate zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSegment {
    pub start: f64,
    pub end: f64,
    pub entries: Vec<SegmentEntry>,
}

impl TraceSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn total_power(&self) -> f64 {
        sum_compensated(self.entries.iter().map(|e| e.power))
    }

    pub fn allocated(&self) -> f64 {
        sum_compensated(self.entries.iter().map(|e| e.assignment.count()))
    }

    pub fn n_active(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Completion {
    pub job: JobId,
    pub release: f64,
    pub time: f64,
}

impl Completion {
    pub fn flow(&self) -> f64 {
        self.time - self.release
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    segments: Vec<TraceSegment>,
    completions: Vec<Completion>,
}

impl Trace {
    pub fn from_parts(segments: Vec<TraceSegment>, completions: Vec<Completion>) -> Self {
        Self {
            segments,
            completions,
        }
    }

    pub fn segments(&self) -> &[TraceSegment] {
        &self.segments
    }

    /// Completions in the order they occurred.
    pub fn completions(&self) -> &[Completion] {
        &self.completions
    }

    pub fn completion_of(&self, job: JobId) -> Option<&Completion> {
        self.completions.iter().find(|c| c.job == job)
    }

    pub fn makespan(&self) -> f64 {
        self.completions
            .iter()
            .map(|c| c.time)
            .fold(0.0, f64::max)
    }

    /// Integrated work per `(job, phase)`.
    pub fn work_by_phase(&self) -> BTreeMap<(JobId, usize), f64> {
        let mut acc: BTreeMap<(JobId, usize), CompensatedSum> = BTreeMap::new();
        for seg in &self.segments {
            let d = seg.duration();
            for e in &seg.entries {
                acc.entry((e.job, e.phase)).or_default().add(e.rate * d);
            }
        }
        acc.into_iter().map(|(k, v)| (k, v.value())).collect()
    }

    /// Total flow as the integral of the active-job count.
    pub fn flow_by_integral(&self) -> f64 {
        sum_compensated(
            self.segments
                .iter()
                .map(|s| s.duration() * s.n_active() as f64),
        )
    }

    /// Total flow as the sum of per-job flow times.
    pub fn flow_by_completions(&self) -> f64 {
        sum_compensated(self.completions.iter().map(Completion::flow))
    }

    pub fn energy(&self) -> f64 {
        sum_compensated(self.segments.iter().map(|s| s.duration() * s.total_power()))
    }

    /// Worst relative gap between integrated and required work over all phases.
    pub fn work_conservation_error(&self, instance: &Instance) -> f64 {
        let done = self.work_by_phase();
        let mut worst: f64 = 0.0;
        for job in instance.jobs() {
            for (k, phase) in job.phases().iter().enumerate() {
                let got = done.get(&(job.id(), k)).copied().unwrap_or(0.0);
                worst = worst.max((got - phase.work()).abs() / phase.work());
            }
        }
        worst
    }

    /// True when consecutive segments share endpoints and every segment has
    /// positive length.
    pub fn is_contiguous(&self) -> bool {
        self.segments.iter().all(|s| s.end > s.start)
            && self.segments.windows(2).all(|w| w[0].end == w[1].start)
    }
}

/// Objective values of a trace.
pub fn metrics(trace: &Trace) -> Metrics {
    Metrics::new(trace.flow_by_integral(), trace.energy(), trace.makespan())
}

/// Simulates `policy` on `instance`, showing it only what its clairvoyance
/// level permits.
pub fn simulate(instance: &Instance, policy: &dyn Policy) -> Result<Trace, SimulationError> {
    policy.check_instance(instance)?;
    let params = *instance.params();
    let level = policy.clairvoyance();
    simulate_with(instance, |active| {
        let view = match level {
            Clairvoyance::NonClairvoyant => {
                PolicyView::NonClairvoyant(NonClairvoyantView::new(active.iter().map(|a| a.id).collect()))
            }
            Clairvoyance::SemiClairvoyant => PolicyView::SemiClairvoyant(SemiClairvoyantView::new(
                active.iter().map(|a| (a.id, a.parallelism)).collect(),
            )),
        };
        policy.assign(&view, &params)
    })
}

struct Running {
    job: usize,
    phase: usize,
    remaining: f64,
}

/// Simulates an arbitrary piecewise-constant decision rule. `decide`
/// receives every active job ascending by id and returns one assignment
/// per job in the same order.
pub fn simulate_with<F>(instance: &Instance, mut decide: F) -> Result<Trace, SimulationError>
where
    F: FnMut(&[ActiveJob]) -> Result<Vec<Assignment>, PolicyError>,
{
    let params = instance.params();
    let alpha = params.alpha();
    let capacity = params.p();
    let jobs = instance.jobs();

    let mut pending: Vec<usize> = (0..jobs.len()).collect();
    // popped from the back: latest release first in the vector
    pending.sort_by(|&a, &b| {
        jobs[b]
            .release()
            .total_cmp(&jobs[a].release())
            .then(jobs[b].id().cmp(&jobs[a].id()))
    });

    let mut active: Vec<Running> = Vec::new();
    let mut segments = Vec::new();
    let mut completions = Vec::new();
    let mut now = pending
        .last()
        .map(|&j| jobs[j].release())
        .unwrap_or(0.0);

    loop {
        while let Some(&j) = pending.last() {
            if jobs[j].release() <= now + EVENT_TOLERANCE {
                pending.pop();
                active.push(Running {
                    job: j,
                    phase: 0,
                    remaining: jobs[j].phases()[0].work(),
                });
            } else {
                break;
            }
        }
        let next_arrival = pending.last().map(|&j| jobs[j].release());

        if active.is_empty() {
            match next_arrival {
                None => break,
                Some(t) => {
                    segments.push(TraceSegment {
                        start: now,
                        end: t,
                        entries: Vec::new(),
                    });
                    now = t;
                    continue;
                }
            }
        }

        active.sort_by_key(|r| jobs[r.job].id());
        let snapshot: Vec<ActiveJob> = active
            .iter()
            .map(|r| ActiveJob {
                id: jobs[r.job].id(),
                phase: r.phase,
                parallelism: jobs[r.job].phases()[r.phase].parallelism(),
                remaining: r.remaining,
            })
            .collect();
        let assignments = decide(&snapshot)?;
        if assignments.len() != active.len() {
            return Err(SimulationError::AssignmentCount {
                expected: active.len(),
                got: assignments.len(),
            });
        }
        let allocated = sum_compensated(assignments.iter().map(Assignment::count));
        if allocated > capacity + CAPACITY_TOLERANCE {
            return Err(SimulationError::CapacityViolation {
                time: now,
                allocated,
                available: params.processors(),
            });
        }

        let rates: Vec<f64> = assignments
            .iter()
            .zip(&snapshot)
            .map(|(a, s)| a.execution_rate(s.parallelism))
            .collect();
        let finish: Vec<f64> = active
            .iter()
            .zip(&rates)
            .map(|(r, &rate)| {
                if rate > 0.0 {
                    r.remaining / rate
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let first_finish = finish.iter().copied().fold(f64::INFINITY, f64::min);
        let step = match next_arrival {
            Some(t) => first_finish.min(t - now),
            None => first_finish,
        };
        if !step.is_finite() {
            return Err(SimulationError::NonTermination { time: now });
        }
        let end = match next_arrival {
            Some(t) if t - now <= step => t,
            _ => now + step,
        };

        if end > now {
            segments.push(TraceSegment {
                start: now,
                end,
                entries: active
                    .iter()
                    .zip(assignments)
                    .zip(&rates)
                    .map(|((r, assignment), &rate)| SegmentEntry {
                        job: jobs[r.job].id(),
                        phase: r.phase,
                        power: assignment.power(alpha),
                        assignment,
                        rate,
                    })
                    .collect(),
            });
        }

        let duration = end - now;
        let mut still_active = Vec::with_capacity(active.len());
        for ((mut r, rate), fin) in active.drain(..).zip(rates).zip(finish) {
            if fin <= duration + EVENT_TOLERANCE {
                r.phase += 1;
                let job = &jobs[r.job];
                if r.phase == job.phases().len() {
                    completions.push(Completion {
                        job: job.id(),
                        release: job.release(),
                        time: end,
                    });
                    continue;
                }
                r.remaining = job.phases()[r.phase].work();
            } else {
                r.remaining -= rate * duration;
            }
            still_active.push(r);
        }
        active = still_active;
        now = end;
    }

    Ok(Trace {
        segments,
        completions,
    })
}
