//! Lower bounds on the optimal objectives, the equal-power rescaling of
//! batched schedules, and a grid-search oracle for tiny instances.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{metrics, simulate_with, Completion, SegmentEntry, Trace, TraceSegment};
use crate::model::{sum_compensated, Assignment, Instance, JobId, PowerParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("instance is not batched (some release time is positive)")]
    NotBatched,
    #[error("instance has a phase that is neither sequential nor fully parallel")]
    NotParseq,
    #[error("segment starting at {start} draws no power but makes progress")]
    DegenerateSegment { start: f64 },
    #[error("instance too large for the oracle: {0}")]
    TooLarge(String),
    #[error("oracle grid needs at least two points and 0 < low < high")]
    BadGrid,
}

/// `alpha / (alpha-1)^(1-1/alpha)`, the minimum of `(1+u)/u^(1/alpha)`
/// scaled back to a cost per unit of normalized work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa(f64);

impl Kappa {
    pub fn new(alpha: f64) -> Self {
        Self(alpha / (alpha - 1.0).powf(1.0 - 1.0 / alpha))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Flow-plus-energy lower bound: every phase runs alone on `h` processors
/// at the cost-minimizing speed. Fully-parallel phases contribute nothing.
pub fn g1_lower_bound(instance: &Instance) -> f64 {
    let params = instance.params();
    let exponent = params.rate_exponent();
    let kappa = Kappa::new(params.alpha()).value();
    let total = sum_compensated(
        instance
            .jobs()
            .iter()
            .flat_map(|j| j.phases().iter())
            .filter(|p| !p.is_fully_parallel())
            .map(|p| p.work() / p.parallelism().powf(exponent)),
    );
    kappa * total
}

/// Makespan-plus-energy lower bound for batched sequential/fully-parallel jobs.
pub fn h_lower_bound(instance: &Instance) -> Result<f64, BaselineError> {
    if !instance.is_batched() {
        return Err(BaselineError::NotBatched);
    }
    if !instance.is_parseq() {
        return Err(BaselineError::NotParseq);
    }
    let params = instance.params();
    let alpha = params.alpha();
    let kappa = Kappa::new(alpha).value();
    let work = sum_compensated(instance.jobs().iter().map(|j| j.total_work()));
    let parallel_term = work / params.p().powf(params.rate_exponent());
    let span_term = sum_compensated(
        instance
            .jobs()
            .iter()
            .map(|j| j.total_span().powf(alpha)),
    )
    .powf(1.0 / alpha);
    Ok(kappa * parallel_term.max(span_term))
}

/// Relative slack under which a segment already counts as balanced.
const BALANCED_TOLERANCE: f64 = 1e-12;

/// Rescales every segment of a batched trace to total power `1/(alpha-1)`.
///
/// Speeds are multiplied by `k = (1/((alpha-1)u))^(1/alpha)` and durations
/// divided by `k`, so each segment does the same work. Segments drawing no
/// power are dropped.
pub fn equal_power_transform(trace: &Trace, params: &PowerParams) -> Result<Trace, BaselineError> {
    if trace.completions().iter().any(|c| c.release != 0.0) {
        return Err(BaselineError::NotBatched);
    }
    let alpha = params.alpha();
    let target = params.balanced_power();

    struct Remap {
        old_start: f64,
        old_end: f64,
        new_start: f64,
        factor: Option<f64>,
    }

    let mut clock = trace.segments().first().map_or(0.0, |s| s.start);
    let mut remaps = Vec::with_capacity(trace.segments().len());
    let mut out = Vec::with_capacity(trace.segments().len());

    for seg in trace.segments() {
        let u = sum_compensated(seg.entries.iter().map(|e| e.assignment.power(alpha)));
        if u == 0.0 {
            if seg.entries.iter().any(|e| e.rate > 0.0) {
                return Err(BaselineError::DegenerateSegment { start: seg.start });
            }
            remaps.push(Remap {
                old_start: seg.start,
                old_end: seg.end,
                new_start: clock,
                factor: None,
            });
            continue;
        }
        let k = if ((u - target) / target).abs() <= BALANCED_TOLERANCE {
            1.0
        } else {
            (target / u).powf(1.0 / alpha)
        };
        let new_end = clock + seg.duration() / k;
        let entries = if k == 1.0 {
            seg.entries.clone()
        } else {
            seg.entries
                .iter()
                .map(|e| {
                    let assignment = e.assignment.scaled(k);
                    SegmentEntry {
                        job: e.job,
                        phase: e.phase,
                        rate: e.rate * k,
                        power: assignment.power(alpha),
                        assignment,
                    }
                })
                .collect()
        };
        remaps.push(Remap {
            old_start: seg.start,
            old_end: seg.end,
            new_start: clock,
            factor: Some(k),
        });
        out.push(TraceSegment {
            start: clock,
            end: new_end,
            entries,
        });
        clock = new_end;
    }

    let map_time = |t: f64| -> f64 {
        for r in &remaps {
            if t <= r.old_end {
                return match r.factor {
                    Some(k) if t > r.old_start => r.new_start + (t - r.old_start) / k,
                    _ => r.new_start,
                };
            }
        }
        clock
    };
    // completions sit on segment ends; reuse the exact new endpoint there
    let mut ends: BTreeMap<u64, f64> = BTreeMap::new();
    for (r, seg) in remaps.iter().filter(|r| r.factor.is_some()).zip(&out) {
        ends.insert(r.old_end.to_bits(), seg.end);
    }
    let completions = trace
        .completions()
        .iter()
        .map(|c| Completion {
            job: c.job,
            release: c.release,
            time: ends
                .get(&c.time.to_bits())
                .copied()
                .unwrap_or_else(|| map_time(c.time)),
        })
        .collect();
    Ok(Trace::from_parts(out, completions))
}

/// Speed grid of the brute-force oracle, as multiples of `(1/(alpha-1))^(1/alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    pub points: usize,
    pub low: f64,
    pub high: f64,
    /// Above this many candidate schedules the search switches from full
    /// enumeration to coordinate descent over the same grid.
    pub max_evaluations: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            points: 64,
            low: 0.05,
            high: 4.0,
            max_evaluations: 1 << 20,
        }
    }
}

impl OracleGrid {
    pub fn speeds(&self, params: &PowerParams) -> Vec<f64> {
        let base = params.balanced_power().powf(1.0 / params.alpha());
        let ratio = self.high / self.low;
        (0..self.points)
            .map(|i| base * self.low * ratio.powf(i as f64 / (self.points - 1) as f64))
            .collect()
    }
}

pub const ORACLE_MAX_JOBS: usize = 3;
pub const ORACLE_MAX_PHASES: usize = 4;
pub const ORACLE_MAX_PROCESSORS: u32 = 4;

/// Best flow time plus energy over a restricted schedule family.
///
/// Each phase runs on a fixed integer number of processors `a <= min(h, P)`
/// at one grid speed; jobs are list-scheduled by a priority order, a job
/// waiting while its allocation does not fit. The result is the cost of a
/// real schedule and therefore an upper bound on the optimum. Besides the
/// grid, each count `a` also tries the balanced speed `(1/((alpha-1)a))^(1/alpha)`,
/// so for a single single-phase job the family contains the optimum.
pub fn brute_force_g(instance: &Instance, grid: &OracleGrid) -> Result<f64, BaselineError> {
    let params = instance.params();
    let jobs = instance.jobs();
    if jobs.len() > ORACLE_MAX_JOBS {
        return Err(BaselineError::TooLarge(format!(
            "{} jobs (max {ORACLE_MAX_JOBS})",
            jobs.len()
        )));
    }
    if instance.phase_count() > ORACLE_MAX_PHASES {
        return Err(BaselineError::TooLarge(format!(
            "{} phases (max {ORACLE_MAX_PHASES})",
            instance.phase_count()
        )));
    }
    if params.processors() > ORACLE_MAX_PROCESSORS {
        return Err(BaselineError::TooLarge(format!(
            "{} processors (max {ORACLE_MAX_PROCESSORS})",
            params.processors()
        )));
    }
    if grid.points < 2 || !(grid.low > 0.0 && grid.high > grid.low) {
        return Err(BaselineError::BadGrid);
    }

    let speeds = grid.speeds(params);
    // phases flattened job-major; options[k] lists (count, speed) for phase k
    let mut slots: Vec<(usize, usize)> = Vec::new();
    let mut options: Vec<Vec<(f64, f64)>> = Vec::new();
    for (j, job) in jobs.iter().enumerate() {
        for (k, phase) in job.phases().iter().enumerate() {
            let cap = phase.parallelism().min(params.p()).floor() as u32;
            let opts = (1..=cap)
                .flat_map(|a| {
                    let a = f64::from(a);
                    speeds
                        .iter()
                        .copied()
                        .chain(std::iter::once(params.balanced_speed(a)))
                        .map(move |s| (a, s))
                })
                .collect();
            slots.push((j, k));
            options.push(opts);
        }
    }
    let index: BTreeMap<JobId, usize> = jobs.iter().enumerate().map(|(i, j)| (j.id(), i)).collect();
    let orders = permutations(jobs.len());

    let evaluate = |choice: &[usize], order: &[usize]| -> f64 {
        let mut plan: Vec<Vec<(f64, f64)>> = jobs.iter().map(|j| vec![(0.0, 0.0); j.phases().len()]).collect();
        for (slot, &c) in choice.iter().enumerate() {
            let (j, k) = slots[slot];
            plan[j][k] = options[slot][c];
        }
        let mut rank = vec![0; jobs.len()];
        for (r, &j) in order.iter().enumerate() {
            rank[j] = r;
        }
        let trace = simulate_with(instance, |active| {
            let mut by_rank: Vec<usize> = (0..active.len()).collect();
            by_rank.sort_by_key(|&i| rank[index[&active[i].id]]);
            let mut free = params.p();
            let mut out = vec![Assignment::idle(); active.len()];
            for i in by_rank {
                let (a, s) = plan[index[&active[i].id]][active[i].phase];
                if a <= free + 1e-12 {
                    out[i] = Assignment::Fluid { count: a, speed: s };
                    free -= a;
                }
            }
            Ok(out)
        })
        .expect("list schedule always runs the top-priority job");
        metrics(&trace).g
    };

    let combos = options
        .iter()
        .try_fold(orders.len(), |acc, o| acc.checked_mul(o.len()));
    let mut best = f64::INFINITY;
    match combos {
        Some(n) if n <= grid.max_evaluations => {
            let mut choice = vec![0usize; options.len()];
            loop {
                for order in &orders {
                    best = best.min(evaluate(&choice, order));
                }
                // odometer increment over the option indices
                let mut slot = 0;
                loop {
                    if slot == choice.len() {
                        return Ok(best);
                    }
                    choice[slot] += 1;
                    if choice[slot] < options[slot].len() {
                        break;
                    }
                    choice[slot] = 0;
                    slot += 1;
                }
            }
        }
        _ => {
            for order in &orders {
                let mut choice: Vec<usize> = options
                    .iter()
                    .map(|opts| balanced_option(opts, params))
                    .collect();
                let mut current = evaluate(&choice, order);
                for _ in 0..100 {
                    let mut improved = false;
                    for slot in 0..choice.len() {
                        for c in 0..options[slot].len() {
                            let saved = choice[slot];
                            choice[slot] = c;
                            let g = evaluate(&choice, order);
                            if g < current {
                                current = g;
                                improved = true;
                            } else {
                                choice[slot] = saved;
                            }
                        }
                    }
                    if !improved {
                        break;
                    }
                }
                best = best.min(current);
            }
            Ok(best)
        }
    }
}

/// Option with the most processors and the grid speed closest to balanced.
fn balanced_option(opts: &[(f64, f64)], params: &PowerParams) -> usize {
    let a = opts.iter().map(|o| o.0).fold(0.0, f64::max);
    let target = params.balanced_speed(a);
    let mut best = 0;
    let mut gap = f64::INFINITY;
    for (i, &(count, speed)) in opts.iter().enumerate() {
        if count == a && (speed - target).abs() < gap {
            gap = (speed - target).abs();
            best = i;
        }
    }
    best
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}
