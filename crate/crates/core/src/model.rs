//! Jobs, instances, processor assignments and the metrics they produce.
//!
//! A job is an ordered list of phases. Each phase carries an amount of work
//! and a parallelism cap `h`: allocated processors beyond `h` contribute
//! nothing, and the fastest processors are always the ones put to use.
//! Parallelism may be any real `h >= 1` or `f64::INFINITY` for a
//! fully-parallel phase.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("alpha must exceed 1 (got {0})")]
    AlphaTooSmall(f64),
    #[error("processor count must be at least 1")]
    NoProcessors,
    #[error("phase work must be positive and finite (got {0})")]
    BadWork(f64),
    #[error("phase parallelism must be >= 1 or inf (got {0})")]
    BadParallelism(f64),
    #[error("release time must be finite and non-negative (got {0})")]
    BadRelease(f64),
    #[error("job {0} has no phases")]
    NoPhases(JobId),
    #[error("instance has no jobs")]
    NoJobs,
    #[error("duplicate job id {0}")]
    DuplicateId(JobId),
    #[error("speeds must be finite and non-negative")]
    BadSpeed,
    #[error("fluid processor count must be finite and non-negative (got {0})")]
    BadCount(f64),
}

/// Power exponent and processor count shared by every job of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    alpha: f64,
    processors: u32,
}

impl PowerParams {
    pub fn new(alpha: f64, processors: u32) -> Result<Self, ModelError> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(ModelError::AlphaTooSmall(alpha));
        }
        if processors == 0 {
            return Err(ModelError::NoProcessors);
        }
        Ok(Self { alpha, processors })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn processors(&self) -> u32 {
        self.processors
    }

    /// `P` as a float, for the closed forms.
    pub fn p(&self) -> f64 {
        f64::from(self.processors)
    }

    /// Exponent `1 - 1/alpha` that appears throughout the rate formulas.
    pub fn rate_exponent(&self) -> f64 {
        1.0 - 1.0 / self.alpha
    }

    /// Power of a single processor running at `speed`.
    pub fn speed_power(&self, speed: f64) -> f64 {
        speed.powf(self.alpha)
    }

    /// Harmonic number of the processor count.
    pub fn harmonic_p(&self) -> f64 {
        harmonic(self.processors as usize)
    }

    /// Total power budget `1/(alpha-1)` that balances time against energy.
    pub fn balanced_power(&self) -> f64 {
        1.0 / (self.alpha - 1.0)
    }

    /// Uniform speed at which `count` processors together draw `balanced_power()`.
    pub fn balanced_speed(&self, count: f64) -> f64 {
        (1.0 / ((self.alpha - 1.0) * count)).powf(1.0 / self.alpha)
    }
}

/// `1 + 1/2 + ... + 1/n`; zero for `n = 0`.
pub fn harmonic(n: usize) -> f64 {
    let mut acc = CompensatedSum::default();
    for i in 1..=n {
        acc.add(1.0 / i as f64);
    }
    acc.value()
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn sum_compensated<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    work: f64,
    parallelism: f64,
}

impl Phase {
    pub fn new(work: f64, parallelism: f64) -> Result<Self, ModelError> {
        if !(work > 0.0) || !work.is_finite() {
            return Err(ModelError::BadWork(work));
        }
        if !(parallelism >= 1.0) {
            return Err(ModelError::BadParallelism(parallelism));
        }
        Ok(Self { work, parallelism })
    }

    pub fn sequential(work: f64) -> Result<Self, ModelError> {
        Self::new(work, 1.0)
    }

    pub fn fully_parallel(work: f64) -> Result<Self, ModelError> {
        Self::new(work, f64::INFINITY)
    }

    pub fn work(&self) -> f64 {
        self.work
    }

    pub fn parallelism(&self) -> f64 {
        self.parallelism
    }

    /// Time to run the phase on `h` or more unit-speed processors.
    pub fn span(&self) -> f64 {
        if self.parallelism.is_infinite() {
            0.0
        } else {
            self.work / self.parallelism
        }
    }

    pub fn is_sequential(&self) -> bool {
        self.parallelism == 1.0
    }

    pub fn is_fully_parallel(&self) -> bool {
        self.parallelism.is_infinite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    id: JobId,
    release: f64,
    phases: Vec<Phase>,
}

impl Job {
    pub fn new(id: JobId, release: f64, phases: Vec<Phase>) -> Result<Self, ModelError> {
        if !(release >= 0.0) || !release.is_finite() {
            return Err(ModelError::BadRelease(release));
        }
        if phases.is_empty() {
            return Err(ModelError::NoPhases(id));
        }
        Ok(Self { id, release, phases })
    }

    pub fn id(&self) -> JobId {
        self.id
    }

    pub fn release(&self) -> f64 {
        self.release
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn total_work(&self) -> f64 {
        sum_compensated(self.phases.iter().map(Phase::work))
    }

    pub fn total_span(&self) -> f64 {
        sum_compensated(self.phases.iter().map(Phase::span))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    params: PowerParams,
    jobs: Vec<Job>,
}

impl Instance {
    pub fn new(params: PowerParams, jobs: Vec<Job>) -> Result<Self, ModelError> {
        if jobs.is_empty() {
            return Err(ModelError::NoJobs);
        }
        let mut ids: Vec<JobId> = jobs.iter().map(Job::id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::DuplicateId(w[0]));
        }
        Ok(Self { params, jobs })
    }

    pub fn params(&self) -> &PowerParams {
        &self.params
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    /// Same jobs under different power parameters.
    pub fn with_params(&self, params: PowerParams) -> Self {
        Self {
            params,
            jobs: self.jobs.clone(),
        }
    }

    pub fn is_batched(&self) -> bool {
        self.jobs.iter().all(|j| j.release == 0.0)
    }

    /// Every phase is either sequential or fully parallel.
    pub fn is_parseq(&self) -> bool {
        self.jobs
            .iter()
            .flat_map(|j| j.phases.iter())
            .all(|p| p.is_sequential() || p.is_fully_parallel())
    }

    pub fn phase_count(&self) -> usize {
        self.jobs.iter().map(|j| j.phases.len()).sum()
    }
}

/// Processors granted to one job for the length of a segment.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    /// Individual processors, fastest first.
    Discrete { speeds: Vec<f64> },
    /// A possibly fractional number of processors sharing one speed.
    Fluid { count: f64, speed: f64 },
}

impl Assignment {
    /// Builds a discrete assignment; speeds are sorted fastest first.
    pub fn discrete(mut speeds: Vec<f64>) -> Result<Self, ModelError> {
        if speeds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(ModelError::BadSpeed);
        }
        speeds.sort_by(|a, b| b.total_cmp(a));
        Ok(Self::Discrete { speeds })
    }

    pub fn fluid(count: f64, speed: f64) -> Result<Self, ModelError> {
        if !(count >= 0.0) || !count.is_finite() {
            return Err(ModelError::BadCount(count));
        }
        if !(speed >= 0.0) || !speed.is_finite() {
            return Err(ModelError::BadSpeed);
        }
        Ok(Self::Fluid { count, speed })
    }

    pub fn idle() -> Self {
        Self::Fluid {
            count: 0.0,
            speed: 0.0,
        }
    }

    /// Number of processors held, whether or not they run.
    pub fn count(&self) -> f64 {
        match self {
            Self::Discrete { speeds } => speeds.len() as f64,
            Self::Fluid { count, .. } => *count,
        }
    }

    /// Execution rate under the maximum utilization policy for parallelism `h`.
    ///
    /// A fractional `h` uses the next processor for `frac(h)` of its speed.
    pub fn execution_rate(&self, h: f64) -> f64 {
        match self {
            Self::Discrete { speeds } => {
                if h.is_infinite() || h >= speeds.len() as f64 {
                    return sum_compensated(speeds.iter().copied());
                }
                let whole = h.floor() as usize;
                let frac = h - h.floor();
                let full = sum_compensated(speeds[..whole].iter().copied());
                full + frac * speeds[whole]
            }
            Self::Fluid { count, speed } => count.min(h) * speed,
        }
    }

    /// Power drawn by every held processor.
    pub fn power(&self, alpha: f64) -> f64 {
        match self {
            Self::Discrete { speeds } => sum_compensated(speeds.iter().map(|s| s.powf(alpha))),
            Self::Fluid { count, speed } => {
                if *count == 0.0 {
                    0.0
                } else {
                    count * speed.powf(alpha)
                }
            }
        }
    }

    /// Same processors with every speed multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Discrete { speeds } => Self::Discrete {
                speeds: speeds.iter().map(|s| s * factor).collect(),
            },
            Self::Fluid { count, speed } => Self::Fluid {
                count: *count,
                speed: speed * factor,
            },
        }
    }
}

/// Objective values of a finished schedule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub flow_total: f64,
    pub energy: f64,
    pub makespan: f64,
    /// Total flow time plus energy.
    pub g: f64,
    /// Makespan plus energy.
    pub h: f64,
}

impl Metrics {
    pub fn new(flow_total: f64, energy: f64, makespan: f64) -> Self {
        Self {
            flow_total,
            energy,
            makespan,
            g: flow_total + energy,
            h: makespan + energy,
        }
    }
}
