//! Lower-bound constructions.
//!
//! The speed-vector game: a non-clairvoyant scheduler fixes speeds
//! `s_1 >= ... >= s_P` for a single job before learning its parallelism
//! `h`; the adversary then picks the `h` that maximizes the cost ratio
//! against the clairvoyant optimum. The robust vector equalizes
//! `h^(1-1/alpha) / (s_1 + ... + s_h)` over all `h`, which is the best
//! the scheduler can do.

use thiserror::Error;

use crate::baselines::Kappa;
use crate::model::{
    harmonic, sum_compensated, CompensatedSum, Instance, Job, JobId, Phase, PowerParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversarialError {
    #[error("every speed is zero; the job never completes")]
    AllZero,
    #[error("speed vector has {got} entries, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("speeds must be finite and non-negative")]
    BadSpeed,
    #[error("budget must be positive and finite (got {0})")]
    BadBudget(f64),
}

/// Speeds for all `P` processors, fastest first, with their power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedVector {
    speeds: Vec<f64>,
    budget: f64,
}

impl SpeedVector {
    /// Sorts `speeds` fastest first and records `sum s^alpha` as the budget.
    pub fn new(mut speeds: Vec<f64>, params: &PowerParams) -> Result<Self, AdversarialError> {
        let p = params.processors() as usize;
        if speeds.len() != p {
            return Err(AdversarialError::WrongLength {
                expected: p,
                got: speeds.len(),
            });
        }
        if speeds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(AdversarialError::BadSpeed);
        }
        speeds.sort_by(|a, b| b.total_cmp(a));
        let budget = sum_compensated(speeds.iter().map(|s| s.powf(params.alpha())));
        Ok(Self { speeds, budget })
    }

    /// Rescales to total power `budget`.
    pub fn normalized(&self, budget: f64, params: &PowerParams) -> Result<Self, AdversarialError> {
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(AdversarialError::BadBudget(budget));
        }
        if self.budget == 0.0 {
            return Err(AdversarialError::AllZero);
        }
        let k = (budget / self.budget).powf(1.0 / params.alpha());
        Self::new(self.speeds.iter().map(|s| s * k).collect(), params)
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `h^(1-1/alpha) / (s_1 + ... + s_h)` for `h = 1..=P`.
    pub fn prefix_ratios(&self, params: &PowerParams) -> Vec<f64> {
        let e = params.rate_exponent();
        let mut prefix = CompensatedSum::default();
        self.speeds
            .iter()
            .enumerate()
            .map(|(i, s)| {
                prefix.add(*s);
                ((i + 1) as f64).powf(e) / prefix.value()
            })
            .collect()
    }
}

/// `x_j = j^(1-1/alpha) - (j-1)^(1-1/alpha)`.
pub fn robust_increments(params: &PowerParams) -> Vec<f64> {
    let e = params.rate_exponent();
    (1..=params.processors())
        .map(|j| f64::from(j).powf(e) - f64::from(j - 1).powf(e))
        .collect()
}

/// Robust speed vector with power budget `budget`: `s_j` proportional to `x_j`.
pub fn robust_speed_vector(params: &PowerParams, budget: f64) -> Result<SpeedVector, AdversarialError> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(AdversarialError::BadBudget(budget));
    }
    let alpha = params.alpha();
    let x = robust_increments(params);
    let norm = sum_compensated(x.iter().map(|v| v.powf(alpha)));
    let scale = (budget / norm).powf(1.0 / alpha);
    let v = SpeedVector {
        speeds: x.iter().map(|v| v * scale).collect(),
        budget,
    };
    debug_assert!({
        let g = v.prefix_ratios(params);
        g.iter().all(|r| ((r - g[0]) / g[0]).abs() < 1e-9)
    });
    Ok(v)
}

/// The adversary's best parallelism and the resulting cost ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryChoice {
    pub h: usize,
    pub ratio: f64,
}

/// Relative margin a later `h` must beat the incumbent by to be chosen.
const TIE_TOLERANCE: f64 = 1e-12;

/// Picks the parallelism maximizing
/// `(alpha-1)^(1-1/alpha) (1+u) / alpha * h^(1-1/alpha) / (s_1+...+s_h)`,
/// the lowest `h` among ties.
pub fn adversary_best_h(
    speeds: &SpeedVector,
    params: &PowerParams,
) -> Result<AdversaryChoice, AdversarialError> {
    if speeds.speeds.first().is_none_or(|s| *s == 0.0) {
        return Err(AdversarialError::AllZero);
    }
    let scale = (1.0 + speeds.budget) / Kappa::new(params.alpha()).value();
    let mut best = AdversaryChoice {
        h: 0,
        ratio: f64::NEG_INFINITY,
    };
    for (i, g) in speeds.prefix_ratios(params).into_iter().enumerate() {
        let ratio = scale * g;
        if ratio > best.ratio * (1.0 + TIE_TOLERANCE) || best.h == 0 {
            best = AdversaryChoice { h: i + 1, ratio };
        }
    }
    Ok(best)
}

/// The guaranteed lower bound `((alpha-1)/alpha) H_P^(1/alpha)` on the game value.
pub fn game_lower_bound(params: &PowerParams) -> f64 {
    (params.alpha() - 1.0) / params.alpha() * params.harmonic_p().powf(1.0 / params.alpha())
}

/// `P` batched sequential jobs; job `i` (1-based) has span `(P-i+1)^(-1/alpha)`.
pub fn staggered_sequential_instance(params: &PowerParams) -> Instance {
    let p = params.processors();
    let jobs = (1..=p)
        .map(|i| {
            let span = 1.0 / f64::from(p - i + 1).powf(1.0 / params.alpha());
            Job::new(JobId(i - 1), 0.0, vec![Phase::sequential(span).expect("positive span")])
                .expect("valid job")
        })
        .collect();
    Instance::new(*params, jobs).expect("at least one job")
}

/// Which analytic guarantee to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guarantee {
    /// N-EQUI, flow time plus energy, any release times.
    NequiFlow,
    /// U-CEQ, flow time plus energy, any release times.
    UceqFlow,
    /// P-FIRST, makespan plus energy, batched sequential/fully-parallel jobs.
    PFirstMakespan,
}

/// Multipliers of the amortized potential argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialConstants {
    pub c1: f64,
    pub c2: f64,
    pub eta_prime: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TheoremConstants {
    Potential(PotentialConstants),
    /// Factor `1 + H_m^(1-1/alpha)` with `m = P`.
    MakespanFactor(f64),
}

impl TheoremConstants {
    /// Competitive ratio bound: `c1 + c2`, or the makespan factor.
    pub fn bound(&self) -> f64 {
        match self {
            Self::Potential(c) => c.c1 + c.c2,
            Self::MakespanFactor(f) => *f,
        }
    }
}

pub fn theorem_constants(params: &PowerParams, guarantee: Guarantee) -> TheoremConstants {
    let a = params.alpha();
    let hp = params.harmonic_p();
    let damp = (a - 1.0).powf(1.0 - 1.0 / a);
    match guarantee {
        Guarantee::NequiFlow => TheoremConstants::Potential(PotentialConstants {
            c1: (4.0 * a.powi(3) / (a - 1.0).powi(2)).max(4f64.powf(a) * a * hp),
            c2: 2.0 * a * (2.0 * hp).powf(1.0 / a),
            eta_prime: 4.0 * a * a / damp,
            lambda: 4f64.powf(a - 1.0) * damp,
        }),
        Guarantee::UceqFlow => TheoremConstants::Potential(PotentialConstants {
            c1: (2.0 * a * a / (a - 1.0)).max(2f64.powf(a) * a),
            c2: 2.0 * a,
            eta_prime: 2.0 * a * a / damp,
            lambda: 2f64.powf(a - 1.0) * damp,
        }),
        Guarantee::PFirstMakespan => {
            TheoremConstants::MakespanFactor(1.0 + harmonic(params.processors() as usize).powf(params.rate_exponent()))
        }
    }
}
