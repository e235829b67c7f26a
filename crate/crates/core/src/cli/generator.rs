//! Seeded random instance generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Instance, Job, JobId, ModelError, Phase, PowerParams};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub seed: u64,
    pub jobs: usize,
    /// Inclusive range of phases per job.
    pub phases: (usize, usize),
    /// Range of work per phase.
    pub work: (f64, f64),
    /// Inclusive range of integer parallelism for phases that are not fully parallel.
    pub parallelism: (u32, u32),
    /// Probability that a phase is fully parallel.
    pub fully_parallel: f64,
    /// Releases are uniform on `[0, release_spread)`; zero means batched.
    pub release_spread: f64,
    /// Restrict phases to sequential or fully parallel.
    pub parseq: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 4,
            phases: (1, 1),
            work: (0.5, 2.0),
            parallelism: (1, 4),
            fully_parallel: 0.0,
            release_spread: 0.0,
            parseq: false,
        }
    }
}

impl RandomSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        if self.phases.0 == 0 || self.phases.0 > self.phases.1 {
            return Err("phases must be a range lo..hi with 1 <= lo <= hi".into());
        }
        if !(self.work.0 > 0.0) || !(self.work.0 <= self.work.1) || !self.work.1.is_finite() {
            return Err("work must be a range lo..hi with 0 < lo <= hi".into());
        }
        if self.parallelism.0 == 0 || self.parallelism.0 > self.parallelism.1 {
            return Err("parallelism must be a range lo..hi with 1 <= lo <= hi".into());
        }
        if !(0.0..=1.0).contains(&self.fully_parallel) {
            return Err("fully_parallel must lie in [0, 1]".into());
        }
        if !(self.release_spread >= 0.0) || !self.release_spread.is_finite() {
            return Err("release_spread must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// Draws an instance; identical specs give identical instances.
pub fn random_instance(spec: &RandomSpec, params: PowerParams) -> Result<Instance, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut jobs = Vec::with_capacity(spec.jobs);
    for i in 0..spec.jobs {
        let release = if spec.release_spread > 0.0 {
            rng.random_range(0.0..spec.release_spread)
        } else {
            0.0
        };
        let k = rng.random_range(spec.phases.0..=spec.phases.1);
        let mut phases = Vec::with_capacity(k);
        for _ in 0..k {
            let work = if spec.work.0 == spec.work.1 {
                spec.work.0
            } else {
                rng.random_range(spec.work.0..spec.work.1)
            };
            let parallel = rng.random_bool(spec.fully_parallel);
            let h = if parallel {
                f64::INFINITY
            } else if spec.parseq {
                1.0
            } else {
                f64::from(rng.random_range(spec.parallelism.0..=spec.parallelism.1))
            };
            phases.push(Phase::new(work, h)?);
        }
        jobs.push(Job::new(JobId(i as u32), release, phases)?);
    }
    Instance::new(params, jobs)
}
