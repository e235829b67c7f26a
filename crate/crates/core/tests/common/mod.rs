//! Corpus generation and closed-form oracles shared by the integration tests.
//! The oracles are written from the formulas directly, without calling the
//! library's own bound code.
#![allow(dead_code)]

use espsim::{Instance, Job, JobId, Phase, PowerParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn params(alpha: f64, p: u32) -> PowerParams {
    PowerParams::new(alpha, p).unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusShape {
    pub max_jobs: usize,
    pub max_phases: usize,
    /// Release times drawn from `[0, spread)`; zero gives batched instances.
    pub release_spread: f64,
    /// Only sequential or fully parallel phases.
    pub parseq: bool,
}

impl CorpusShape {
    pub const GENERAL: Self = Self { max_jobs: 6, max_phases: 3, release_spread: 3.0, parseq: false };
    pub const BATCHED: Self = Self { max_jobs: 6, max_phases: 3, release_spread: 0.0, parseq: false };
    pub const PARSEQ: Self = Self { max_jobs: 6, max_phases: 3, release_spread: 0.0, parseq: true };
}

pub fn random_phase(rng: &mut ChaCha8Rng, p: u32, parseq: bool) -> Phase {
    let work = rng.random_range(0.1..5.0);
    let h = if parseq {
        if rng.random_bool(0.5) {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        match rng.random_range(0..4) {
            0 => 1.0,
            1 => f64::from(rng.random_range(2..=2 * p + 1)),
            2 => rng.random_range(1.0..f64::from(p) + 2.0),
            _ => f64::INFINITY,
        }
    };
    Phase::new(work, h).unwrap()
}

pub fn random_instance(rng: &mut ChaCha8Rng, params: PowerParams, shape: CorpusShape) -> Instance {
    let n = rng.random_range(1..=shape.max_jobs);
    let jobs = (0..n)
        .map(|i| {
            let release = if shape.release_spread > 0.0 { rng.random_range(0.0..shape.release_spread) } else { 0.0 };
            let k = rng.random_range(1..=shape.max_phases);
            let phases = (0..k).map(|_| random_phase(rng, params.processors(), shape.parseq)).collect();
            Job::new(JobId(i as u32), release, phases).unwrap()
        })
        .collect();
    Instance::new(params, jobs).unwrap()
}

pub fn single_phase_instance(params: PowerParams, jobs: &[(f64, f64)]) -> Instance {
    let jobs = jobs
        .iter()
        .enumerate()
        .map(|(i, &(w, h))| Job::new(JobId(i as u32), 0.0, vec![Phase::new(w, h).unwrap()]).unwrap())
        .collect();
    Instance::new(params, jobs).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn harmonic(n: u32) -> f64 {
    (1..=n).map(|i| 1.0 / f64::from(i)).sum()
}

pub fn kappa(alpha: f64) -> f64 {
    alpha / (alpha - 1.0).powf(1.0 - 1.0 / alpha)
}

/// Sum over phases of the single-phase optimum `kappa w / h^(1-1/alpha)`.
pub fn g1_oracle(instance: &Instance) -> f64 {
    let alpha = instance.params().alpha();
    let mut total = 0.0;
    for job in instance.jobs() {
        for ph in job.phases() {
            if ph.parallelism().is_finite() {
                total += kappa(alpha) * ph.work() / ph.parallelism().powf(1.0 - 1.0 / alpha);
            }
        }
    }
    total
}

/// `kappa max(W / P^(1-1/alpha), (sum_i l_i^alpha)^(1/alpha))` with `l_i` the sequential work of job `i`.
pub fn h_oracle(instance: &Instance) -> f64 {
    let alpha = instance.params().alpha();
    let p = f64::from(instance.params().processors());
    let mut total_work = 0.0;
    let mut span_power = 0.0;
    for job in instance.jobs() {
        let mut span = 0.0;
        for ph in job.phases() {
            total_work += ph.work();
            if ph.parallelism() == 1.0 {
                span += ph.work();
            }
        }
        span_power += f64::powf(span, alpha);
    }
    kappa(alpha) * (total_work / p.powf(1.0 - 1.0 / alpha)).max(span_power.powf(1.0 / alpha))
}

pub fn uceq_bound(alpha: f64) -> f64 {
    (2.0 * alpha * alpha / (alpha - 1.0)).max(2f64.powf(alpha) * alpha) + 2.0 * alpha
}

pub fn nequi_bound(alpha: f64, p: u32) -> f64 {
    let hp = harmonic(p);
    let c1 = (4.0 * alpha.powi(3) / (alpha - 1.0).powi(2)).max(4f64.powf(alpha) * alpha * hp);
    let c2 = 2.0 * alpha * (2.0 * hp).powf(1.0 / alpha);
    c1 + c2
}

pub fn pfirst_bound(alpha: f64, p: u32) -> f64 {
    1.0 + harmonic(p).powf(1.0 - 1.0 / alpha)
}

/// `max_h (1+b)/kappa * h^(1-1/alpha) / (s_1 + ... + s_h)` for descending speeds.
pub fn adversary_oracle(speeds: &[f64], alpha: f64) -> f64 {
    let b: f64 = speeds.iter().map(|s| s.powf(alpha)).sum();
    let mut best: f64 = 0.0;
    let mut prefix = 0.0;
    for (i, s) in speeds.iter().enumerate() {
        prefix += s;
        let h = (i + 1) as f64;
        best = best.max((1.0 + b) / kappa(alpha) * h.powf(1.0 - 1.0 / alpha) / prefix);
    }
    best
}

/// Speeds proportional to `j^(1-1/alpha) - (j-1)^(1-1/alpha)` with `sum s^alpha = b`.
pub fn robust_oracle(p: u32, alpha: f64, b: f64) -> Vec<f64> {
    let e = 1.0 - 1.0 / alpha;
    let x: Vec<f64> = (1..=p).map(|j| f64::from(j).powf(e) - f64::from(j - 1).powf(e)).collect();
    let norm: f64 = x.iter().map(|v| v.powf(alpha)).sum();
    let c = (b / norm).powf(1.0 / alpha);
    x.iter().map(|v| c * v).collect()
}

/// The potential integral evaluated at interval midpoints by direct counting.
pub fn potential_oracle(online: &[f64], reference: &[f64], eta: f64, alpha: f64) -> f64 {
    let e = 1.0 - 1.0 / alpha;
    let mut points: Vec<f64> = online.iter().chain(reference).copied().filter(|w| *w > 0.0).collect();
    points.push(0.0);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut total = 0.0;
    for pair in points.windows(2) {
        let z = 0.5 * (pair[0] + pair[1]);
        let n = online.iter().filter(|w| **w >= z).count();
        let n_ref = reference.iter().filter(|w| **w >= z).count() as f64;
        let stairs: f64 = (1..=n).map(|i| (i as f64).powf(e)).sum();
        total += (pair[1] - pair[0]) * (stairs - (n as f64).powf(e) * n_ref);
    }
    eta * total
}
