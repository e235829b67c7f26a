//! Ratio measurements against the lower bounds, and the amortization
//! potential evaluated on concrete remaining-work profiles.

use thiserror::Error;

use crate::adversarial::{
    adversary_best_h, game_lower_bound, robust_speed_vector, theorem_constants, AdversarialError,
    Guarantee,
};
use crate::baselines::{g1_lower_bound, h_lower_bound, BaselineError, Kappa};
use crate::engine::{metrics, simulate, SimulationError, Trace};
use crate::model::{sum_compensated, CompensatedSum, Instance, Metrics, PowerParams};
use crate::policies::PolicyKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Adversarial(#[from] AdversarialError),
    #[error("remaining work must be finite and non-negative (got {0})")]
    BadRemaining(f64),
}

/// Relative slack on every ratio and potential comparison.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// Remaining works of the active jobs under an online schedule and under a
/// reference schedule, plus the potential's scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState {
    online: Vec<f64>,
    reference: Vec<f64>,
    eta: f64,
}

impl PotentialState {
    pub fn new(mut online: Vec<f64>, mut reference: Vec<f64>, eta: f64) -> Result<Self, AnalysisError> {
        if let Some(&bad) = online
            .iter()
            .chain(&reference)
            .find(|w| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(AnalysisError::BadRemaining(bad));
        }
        online.sort_by(f64::total_cmp);
        reference.sort_by(f64::total_cmp);
        Ok(Self {
            online,
            reference,
            eta,
        })
    }

    pub fn empty(eta: f64) -> Self {
        Self {
            online: Vec::new(),
            reference: Vec::new(),
            eta,
        }
    }

    pub fn online(&self) -> &[f64] {
        &self.online
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// A new job of work `w` enters both schedules.
    pub fn with_arrival(&self, w: f64) -> Result<Self, AnalysisError> {
        let mut online = self.online.clone();
        let mut reference = self.reference.clone();
        online.push(w);
        reference.push(w);
        Self::new(online, reference, self.eta)
    }
}

/// Scale of the potential used for a guarantee: `eta' H_P^(1/alpha) / P^(1-1/alpha)`
/// for N-EQUI and `eta' / P^(1-1/alpha)` for U-CEQ.
pub fn potential_eta(params: &PowerParams, guarantee: Guarantee) -> Option<f64> {
    let eta_prime = match theorem_constants(params, guarantee) {
        crate::adversarial::TheoremConstants::Potential(c) => c.eta_prime,
        crate::adversarial::TheoremConstants::MakespanFactor(_) => return None,
    };
    let denom = params.p().powf(params.rate_exponent());
    match guarantee {
        Guarantee::NequiFlow => Some(eta_prime * params.harmonic_p().powf(1.0 / params.alpha()) / denom),
        Guarantee::UceqFlow => Some(eta_prime / denom),
        Guarantee::PFirstMakespan => None,
    }
}

/// Number of entries `>= z` in an ascending slice.
fn count_at_least(sorted: &[f64], z: f64) -> usize {
    sorted.len() - sorted.partition_point(|w| *w < z)
}

/// Evaluates
/// `eta * integral over z of [ sum_{i<=n(z)} i^(1-1/alpha) - n(z)^(1-1/alpha) n*(z) ] dz`
/// where `n(z)` and `n*(z)` count jobs with remaining work at least `z`.
/// Both counts are step functions, so the integral is a finite sum.
pub fn potential(state: &PotentialState, params: &PowerParams) -> f64 {
    let e = params.rate_exponent();
    let mut power_prefix = Vec::with_capacity(state.online.len() + 1);
    let mut acc = CompensatedSum::default();
    power_prefix.push(0.0);
    for i in 1..=state.online.len() {
        acc.add((i as f64).powf(e));
        power_prefix.push(acc.value());
    }

    let mut breaks: Vec<f64> = state
        .online
        .iter()
        .chain(&state.reference)
        .copied()
        .filter(|z| *z > 0.0)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut integral = CompensatedSum::default();
    let mut prev = 0.0;
    for z in breaks {
        // on (prev, z] both counts equal their value at z
        let n = count_at_least(&state.online, z);
        let n_ref = count_at_least(&state.reference, z) as f64;
        let phi = power_prefix[n] - (n as f64).powf(e) * n_ref;
        integral.add((z - prev) * phi);
        prev = z;
    }
    state.eta * integral.value()
}

/// Whether adding a job of work `w` to both schedules leaves the potential
/// no larger than before.
pub fn check_arrival_condition(
    state: &PotentialState,
    new_work: f64,
    params: &PowerParams,
) -> Result<bool, AnalysisError> {
    let before = potential(state, params);
    let after = potential(&state.with_arrival(new_work)?, params);
    Ok(after <= before + RATIO_TOLERANCE * before.abs().max(1.0))
}

/// Remaining work per active job at time `t`: the unfinished part of the
/// current phase plus every later phase. Jobs released after `t` or already
/// complete are omitted.
pub fn remaining_works(instance: &Instance, trace: &Trace, t: f64) -> Vec<f64> {
    instance
        .jobs()
        .iter()
        .filter(|j| j.release() <= t)
        .filter(|j| trace.completion_of(j.id()).is_none_or(|c| c.time > t))
        .map(|j| {
            let done = sum_compensated(trace.segments().iter().filter(|s| s.start < t).flat_map(|s| {
                let d = s.end.min(t) - s.start;
                s.entries
                    .iter()
                    .filter(|e| e.job == j.id())
                    .map(move |e| e.rate * d)
            }));
            (j.total_work() - done).max(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Total flow time plus energy.
    G,
    /// Makespan plus energy.
    H,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::G => "G",
            Self::H => "H",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "G" | "g" => Ok(Self::G),
            "H" | "h" => Ok(Self::H),
            other => Err(format!("unknown objective `{other}` (expected G or H)")),
        }
    }
}

/// Whether the guarantee caps the ratio from above or below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub instance_id: String,
    pub policy: String,
    pub objective: Objective,
    pub params: PowerParams,
    pub n_jobs: usize,
    pub metrics: Metrics,
    pub lower_bound: f64,
    pub ratio: f64,
    pub theorem_bound: Option<f64>,
    pub bound_kind: BoundKind,
    pub bound_ok: bool,
}

/// Guarantee that applies to a policy/objective pair, if any.
pub fn applicable_guarantee(policy: PolicyKind, objective: Objective) -> Option<Guarantee> {
    match (policy, objective) {
        (PolicyKind::Nequi, Objective::G) => Some(Guarantee::NequiFlow),
        (PolicyKind::Uceq, Objective::G) => Some(Guarantee::UceqFlow),
        (PolicyKind::PFirst, Objective::H) => Some(Guarantee::PFirstMakespan),
        _ => None,
    }
}

/// Simulates `policy`, divides the objective by its lower bound and checks
/// the ratio against the matching guarantee.
pub fn ratio_harness(
    instance_id: &str,
    instance: &Instance,
    policy: PolicyKind,
    objective: Objective,
) -> Result<RatioReport, AnalysisError> {
    let trace = simulate(instance, &policy)?;
    let m = metrics(&trace);
    let (measured, lower_bound) = match objective {
        Objective::G => (m.g, g1_lower_bound(instance)),
        Objective::H => (m.h, h_lower_bound(instance)?),
    };
    let ratio = measured / lower_bound;
    let theorem_bound =
        applicable_guarantee(policy, objective).map(|g| theorem_constants(instance.params(), g).bound());
    let bound_ok = ratio >= 1.0 - RATIO_TOLERANCE
        && theorem_bound.is_none_or(|b| ratio <= b * (1.0 + RATIO_TOLERANCE));
    Ok(RatioReport {
        instance_id: instance_id.to_string(),
        policy: policy.as_str().to_string(),
        objective,
        params: *instance.params(),
        n_jobs: instance.jobs().len(),
        metrics: m,
        lower_bound,
        ratio,
        theorem_bound,
        bound_kind: BoundKind::Upper,
        bound_ok,
    })
}

/// Plays the speed-vector game with the robust vector at power `budget`.
///
/// The report describes a unit-work job at the adversary's chosen
/// parallelism: metrics are those of the fixed-speed schedule, the lower
/// bound is the clairvoyant optimum, and the guarantee is the game's
/// lower bound on the ratio.
pub fn game_report(instance_id: &str, params: &PowerParams, budget: f64) -> Result<RatioReport, AnalysisError> {
    let v = robust_speed_vector(params, budget)?;
    let choice = adversary_best_h(&v, params)?;
    let rate = sum_compensated(v.speeds()[..choice.h].iter().copied());
    let time = 1.0 / rate;
    let m = Metrics::new(time, v.budget() * time, time);
    let optimum = Kappa::new(params.alpha()).value() / (choice.h as f64).powf(params.rate_exponent());
    let bound = game_lower_bound(params);
    Ok(RatioReport {
        instance_id: instance_id.to_string(),
        policy: "robust".to_string(),
        objective: Objective::G,
        params: *params,
        n_jobs: 1,
        metrics: m,
        lower_bound: optimum,
        ratio: choice.ratio,
        theorem_bound: Some(bound),
        bound_kind: BoundKind::Lower,
        bound_ok: choice.ratio >= bound * (1.0 - RATIO_TOLERANCE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::staggered_sequential_instance;
    use crate::model::{Job, JobId, Phase};

    fn params(alpha: f64, p: u32) -> PowerParams {
        PowerParams::new(alpha, p).unwrap()
    }

    fn state(online: &[f64], reference: &[f64]) -> PotentialState {
        PotentialState::new(online.to_vec(), reference.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn potential_examples() {
        let p = params(2.0, 4);
        assert_eq!(potential(&PotentialState::empty(3.0), &p), 0.0);
        assert_eq!(potential(&state(&[1.0], &[1.0]), &p), 0.0);
        assert_eq!(potential(&state(&[1.0], &[]), &p), 1.0);
    }

    #[test]
    fn potential_hand_computed() {
        // online {1, 2}, reference {2}, alpha 2:
        // (0,1]: n=2, n*=1 -> 1 + sqrt2 - sqrt2 = 1
        // (1,2]: n=1, n*=1 -> 1 - 1 = 0
        let p = params(2.0, 1);
        let s = PotentialState::new(vec![2.0, 1.0], vec![2.0], 2.5).unwrap();
        assert!((potential(&s, &p) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn arrival_examples() {
        let p = params(2.0, 2);
        assert!(check_arrival_condition(&PotentialState::empty(1.0), 1.0, &p).unwrap());
        assert!(check_arrival_condition(&state(&[2.0], &[2.0]), 1.0, &p).unwrap());
    }

    #[test]
    fn zero_remaining_jobs_do_not_change_potential() {
        let p = params(3.0, 2);
        let base = state(&[0.5, 2.0], &[1.5]);
        let with_zero = state(&[0.5, 2.0, 0.0], &[1.5, 0.0]);
        assert_eq!(potential(&base, &p), potential(&with_zero, &p));
    }

    #[test]
    fn rejects_negative_remaining() {
        assert_eq!(
            PotentialState::new(vec![-1.0], vec![], 1.0).unwrap_err(),
            AnalysisError::BadRemaining(-1.0)
        );
    }

    #[test]
    fn eta_values() {
        let p = params(2.0, 4);
        let e = potential_eta(&p, Guarantee::UceqFlow).unwrap();
        assert!((e - 8.0 / 2.0).abs() < 1e-12);
        let e = potential_eta(&p, Guarantee::NequiFlow).unwrap();
        assert!((e - 16.0 * (25.0f64 / 12.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(potential_eta(&p, Guarantee::PFirstMakespan), None);
    }

    #[test]
    fn remaining_work_reads_partial_progress() {
        let p = params(2.0, 1);
        let i = Instance::new(
            p,
            vec![Job::new(JobId(0), 0.0, vec![Phase::sequential(1.0).unwrap(), Phase::sequential(2.0).unwrap()]).unwrap()],
        )
        .unwrap();
        let t = simulate(&i, &PolicyKind::Uceq).unwrap();
        assert_eq!(remaining_works(&i, &t, 0.0), vec![3.0]);
        assert!((remaining_works(&i, &t, 1.5)[0] - 1.5).abs() < 1e-12);
        assert!(remaining_works(&i, &t, 3.0).is_empty());
    }

    #[test]
    fn harness_examples() {
        let p = params(2.0, 4);
        let i = Instance::new(p, vec![Job::new(JobId(0), 0.0, vec![Phase::new(4.0, 4.0).unwrap()]).unwrap()]).unwrap();
        let r = ratio_harness("one", &i, PolicyKind::Uceq, Objective::G).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-9);
        assert_eq!(r.theorem_bound, Some(12.0));
        assert!(r.bound_ok);

        let t5 = staggered_sequential_instance(&params(2.0, 3));
        let r = ratio_harness("t5", &t5, PolicyKind::PFirst, Objective::H).unwrap();
        assert!((r.metrics.h - 2.9528).abs() < 1e-3);
        assert!((r.lower_bound - 2.7080).abs() < 1e-3);
        assert!((r.ratio - 1.0904).abs() < 1e-3);
        assert!(r.ratio <= 1.0 + (11.0f64 / 6.0).sqrt());
        assert!(r.bound_ok);

        let p = params(2.0, 1);
        let i = Instance::new(p, vec![Job::new(JobId(0), 0.0, vec![Phase::sequential(1.0).unwrap()]).unwrap()]).unwrap();
        let r = ratio_harness("n", &i, PolicyKind::Nequi, Objective::G).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn harness_h_needs_parseq_batch() {
        let p = params(2.0, 4);
        let i = Instance::new(p, vec![Job::new(JobId(0), 0.0, vec![Phase::new(4.0, 3.0).unwrap()]).unwrap()]).unwrap();
        assert!(matches!(
            ratio_harness("x", &i, PolicyKind::Uceq, Objective::H),
            Err(AnalysisError::Baseline(BaselineError::NotParseq))
        ));
    }

    #[test]
    fn game_report_respects_lower_bound() {
        for p in [1, 2, 8, 32] {
            let pp = params(2.0, p);
            let r = game_report("g", &pp, pp.balanced_power()).unwrap();
            assert!(r.bound_ok);
            assert!((r.metrics.g / r.lower_bound - r.ratio).abs() < 1e-9 * r.ratio);
        }
    }
}
