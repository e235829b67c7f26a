//! Scenario-driven front end: `run`, `sweep`, `bounds` and `game`.
//!
//! Every command returns a [`Report`] holding the CSV text; the binary only
//! decides where to write it and which exit code to use.

pub mod generator;
pub mod report;
pub mod scenario;

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::adversarial::{adversary_best_h, game_lower_bound, robust_speed_vector, AdversarialError};
use crate::analysis::{game_report, ratio_harness, AnalysisError, Objective, RatioReport};
use crate::baselines::{g1_lower_bound, h_lower_bound, Kappa};
use crate::model::PowerParams;
use crate::policies::PolicyKind;
use report::{fmt_float, run_row, RUN_HEADER};
pub use scenario::{Resolved, Scenario, Source};

pub const SEED_ENV: &str = "ESPSIM_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: field `{field}`: {message}")]
    Parse { line: usize, field: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Simulation { context: String, source: AnalysisError },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Usage(_) | Self::Io { .. } => 2,
            Self::Simulation { .. } => 3,
        }
    }
}

/// CSV output of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    /// False if any row violated its bound.
    pub all_ok: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.all_ok {
            0
        } else {
            1
        }
    }
}

/// Reads `ESPSIM_SEED`, if set.
pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be a non-negative integer (got `{v}`)"))),
        Err(_) => Ok(None),
    }
}

/// Writes to `path`, or stdout for `-`.
pub fn write_output(path: &str, csv: &str) -> Result<(), CliError> {
    use std::io::Write;
    let io = |source| CliError::Io { path: path.to_string(), source };
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(csv.as_bytes()).map_err(io)?;
        out.flush().map_err(io)
    } else {
        std::fs::write(Path::new(path), csv).map_err(io)
    }
}

fn sim_err(id: &str, policy: &str) -> impl FnOnce(AnalysisError) -> CliError {
    let context = format!("{id}/{policy}");
    move |source| CliError::Simulation { context, source }
}

fn default_objective(policy: PolicyKind) -> Objective {
    match policy {
        PolicyKind::PFirst => Objective::H,
        PolicyKind::Nequi | PolicyKind::Uceq => Objective::G,
    }
}

fn section_reports(sec: &Resolved) -> Result<Vec<RatioReport>, CliError> {
    if let Source::Game { budget } = sec.source {
        let b = budget.unwrap_or(sec.params.balanced_power());
        return Ok(vec![game_report(&sec.id, &sec.params, b).map_err(sim_err(&sec.id, "robust"))?]);
    }
    let instance = sec.instance()?.expect("non-game section has an instance");
    let mut out = Vec::new();
    for &policy in &sec.policies {
        let objectives = match &sec.objectives {
            Some(list) => list.clone(),
            None => vec![default_objective(policy)],
        };
        for objective in objectives {
            out.push(ratio_harness(&sec.id, &instance, policy, objective).map_err(sim_err(&sec.id, policy.as_str()))?);
        }
    }
    Ok(out)
}

fn scenario_reports(scenario: &Scenario, seed: Option<u64>) -> Result<Vec<RatioReport>, CliError> {
    let scenario = match seed {
        Some(s) => scenario.with_seed(s),
        None => scenario.clone(),
    };
    let mut out = Vec::new();
    for sec in scenario.resolve()? {
        out.extend(section_reports(&sec)?);
    }
    Ok(out)
}

/// One row per (section, policy, objective), in file order.
pub fn run(scenario: &Scenario, seed: Option<u64>) -> Result<Report, CliError> {
    let rows = scenario_reports(scenario, seed)?;
    let mut csv = String::from(RUN_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&run_row(r));
        csv.push('\n');
    }
    Ok(Report { csv, all_ok: rows.iter().all(|r| r.bound_ok) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Processors,
    Jobs,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Processors => "P",
            Self::Jobs => "n_jobs",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "P" => Ok(Self::Processors),
            "n_jobs" => Ok(Self::Jobs),
            _ => Err(CliError::Usage(format!("unknown sweep parameter `{s}` (expected alpha, P or n_jobs)"))),
        }
    }
}

/// Parses a comma-separated value list for `param`.
pub fn parse_sweep_values(param: SweepParam, list: &str) -> Result<Vec<f64>, CliError> {
    let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage("empty sweep value list".into()));
    }
    items
        .into_iter()
        .map(|s| {
            let bad = || CliError::Usage(format!("invalid {} value `{s}`", param.as_str()));
            match param {
                SweepParam::Alpha => {
                    let a: f64 = s.parse().map_err(|_| bad())?;
                    PowerParams::new(a, 1).map_err(|e| CliError::Usage(e.to_string()))?;
                    Ok(a)
                }
                SweepParam::Processors | SweepParam::Jobs => {
                    let n: u32 = s.parse().map_err(|_| bad())?;
                    if n == 0 {
                        return Err(bad());
                    }
                    Ok(f64::from(n))
                }
            }
        })
        .collect()
}

/// Exponent `e` such that `ratio / ln(P)^e` should stay flat as `P` grows.
pub fn growth_exponent(policy: &str, alpha: f64) -> f64 {
    match policy {
        "nequi" => 1.0,
        "pfirst" => 1.0 - 1.0 / alpha,
        "robust" => 1.0 / alpha,
        _ => 0.0,
    }
}

/// `ratio / ln(P)^exponent`; `None` when `ln P = 0` and the exponent is not.
pub fn normalized_ratio(ratio: f64, processors: u32, exponent: f64) -> Option<f64> {
    if exponent == 0.0 {
        return Some(ratio);
    }
    if processors < 2 {
        return None;
    }
    Some(ratio / f64::from(processors).ln().powf(exponent))
}

pub const SWEEP_PREFIX: &str = "sweep_param,sweep_value,";
pub const SWEEP_SUFFIX: &str = ",growth_exponent,ratio_over_log_p";

/// Runs the scenario once per value; rows are ordered by value, then by
/// section, policy and objective.
pub fn sweep(scenario: &Scenario, param: SweepParam, values: &[f64], seed: Option<u64>) -> Result<Report, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("empty sweep value list".into()));
    }
    let points: Vec<Scenario> = values
        .iter()
        .map(|&v| match param {
            SweepParam::Alpha => Ok(scenario.with_alpha(v)),
            SweepParam::Processors => Ok(scenario.with_processors(v as u32)),
            SweepParam::Jobs => scenario
                .with_jobs(v as usize)
                .ok_or_else(|| CliError::Usage("n_jobs sweeps need a uniform-random generator section".into())),
        })
        .collect::<Result<_, _>>()?;
    let results: Vec<Vec<RatioReport>> =
        points.par_iter().map(|s| scenario_reports(s, seed)).collect::<Result<_, _>>()?;

    let mut csv = format!("{SWEEP_PREFIX}{RUN_HEADER}{SWEEP_SUFFIX}\n");
    let mut all_ok = true;
    for (&v, rows) in values.iter().zip(&results) {
        for r in rows {
            all_ok &= r.bound_ok;
            let e = growth_exponent(&r.policy, r.params.alpha());
            let norm = normalized_ratio(r.ratio, r.params.processors(), e);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                param.as_str(),
                fmt_float(v),
                run_row(r),
                fmt_float(e),
                norm.map(fmt_float).unwrap_or_default()
            ));
        }
    }
    Ok(Report { csv, all_ok })
}

pub const BOUNDS_HEADER: &str = "instance_id,alpha,P,n_jobs,g1_lower_bound,h_lower_bound";

/// Lower bounds only; `h_lower_bound` is empty where it does not apply.
/// Game sections are skipped.
pub fn bounds(scenario: &Scenario, seed: Option<u64>) -> Result<Report, CliError> {
    let scenario = match seed {
        Some(s) => scenario.with_seed(s),
        None => scenario.clone(),
    };
    let mut csv = format!("{BOUNDS_HEADER}\n");
    for sec in scenario.resolve()? {
        let Some(instance) = sec.instance()? else { continue };
        let h = h_lower_bound(&instance).ok();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sec.id,
            fmt_float(sec.params.alpha()),
            sec.params.processors(),
            instance.jobs().len(),
            fmt_float(g1_lower_bound(&instance)),
            h.map(fmt_float).unwrap_or_default()
        ));
    }
    Ok(Report { csv, all_ok: true })
}

pub const GAME_HEADER: &str = "alpha,P,budget,h,speed,adversary_ratio,chosen,game_lower_bound,bound_ok";

/// The robust vector against every adversary parallelism `h = 1..P`.
/// The default budget is the balanced power `1/(alpha-1)`.
pub fn game(params: &PowerParams, budget: Option<f64>) -> Result<Report, CliError> {
    let budget = budget.unwrap_or(params.balanced_power());
    let err = |e: AdversarialError| CliError::Simulation {
        context: "game".into(),
        source: AnalysisError::Adversarial(e),
    };
    let v = robust_speed_vector(params, budget).map_err(err)?;
    let choice = adversary_best_h(&v, params).map_err(err)?;
    let bound = game_lower_bound(params);
    let ok = choice.ratio >= bound * (1.0 - crate::analysis::RATIO_TOLERANCE);
    let scale = (1.0 + v.budget()) / Kappa::new(params.alpha()).value();
    let mut csv = format!("{GAME_HEADER}\n");
    for (i, (s, g)) in v.speeds().iter().zip(v.prefix_ratios(params)).enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_float(params.alpha()),
            params.processors(),
            fmt_float(v.budget()),
            i + 1,
            fmt_float(*s),
            fmt_float(scale * g),
            i + 1 == choice.h,
            fmt_float(bound),
            ok
        ));
    }
    Ok(Report { csv, all_ok: ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    const STAGGERED: &str = "alpha = 2\nP = 3\n[generator t5]\nkind = staggered\npolicies = pfirst\n";

    fn field(csv: &str, row: usize, name: &str) -> String {
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let col = header.iter().position(|h| *h == name).unwrap();
        lines.nth(row).unwrap().split(',').nth(col).unwrap().to_string()
    }

    #[test]
    fn staggered_pfirst_row() {
        let r = run(&Scenario::parse(STAGGERED).unwrap(), None).unwrap();
        assert!(r.all_ok);
        let h: f64 = field(&r.csv, 0, "H").parse().unwrap();
        let lb: f64 = field(&r.csv, 0, "lower_bound").parse().unwrap();
        assert!((h - 2.9528).abs() < 1e-3, "{h}");
        assert!((lb - 2.7080).abs() < 1e-3, "{lb}");
        assert_eq!(field(&r.csv, 0, "bound_ok"), "true");
    }

    #[test]
    fn single_job_uceq_row() {
        let s = Scenario::parse("alpha = 2\nP = 4\npolicies = uceq\n[instance one]\njob = 4@4\n").unwrap();
        let r = run(&s, None).unwrap();
        assert_eq!(field(&r.csv, 0, "G"), "4");
        assert_eq!(field(&r.csv, 0, "ratio"), "1");
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn explicit_objectives_multiply_rows() {
        let s = Scenario::parse("alpha = 2\nP = 2\npolicies = nequi, uceq\nobjectives = G, H\n[instance a]\njob = 1@1\njob = 2@inf\n")
            .unwrap();
        let r = run(&s, None).unwrap();
        assert_eq!(r.csv.lines().count(), 5);
        assert_eq!(field(&r.csv, 1, "theorem_bound"), "");
    }

    #[test]
    fn pfirst_on_general_instance_is_a_simulation_error() {
        let s = Scenario::parse("alpha = 2\nP = 2\npolicies = pfirst\n[instance a]\njob = 1@2\n").unwrap();
        assert_eq!(run(&s, None).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn sweep_orders_and_normalizes() {
        let s = Scenario::parse("alpha = 2\nP = 2\npolicies = nequi, uceq\n[generator g]\nkind = uniform-random\nseed = 5\njobs = 3\n")
            .unwrap();
        let r = sweep(&s, SweepParam::Processors, &[2.0, 8.0, 1.0], None).unwrap();
        let lines: Vec<&str> = r.csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("P,2,g,nequi,2,2,"));
        assert!(lines[2].starts_with("P,2,g,uceq,2,2,"));
        assert!(lines[3].starts_with("P,8,g,nequi,2,8,"));
        assert!(lines[5].ends_with(",1,"), "{}", lines[5]);
        assert_eq!(lines[6].rsplit(',').nth(1), Some("0"));
        let ratio: f64 = field(&r.csv, 2, "ratio").parse().unwrap();
        let norm: f64 = field(&r.csv, 2, "ratio_over_log_p").parse().unwrap();
        assert!((norm - ratio / 8f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn sweep_rejects_bad_values() {
        assert_eq!(parse_sweep_values(SweepParam::Alpha, "").unwrap_err().exit_code(), 2);
        assert_eq!(parse_sweep_values(SweepParam::Alpha, "1.0").unwrap_err().exit_code(), 2);
        assert_eq!(parse_sweep_values(SweepParam::Processors, "2,x").unwrap_err().exit_code(), 2);
        assert_eq!(parse_sweep_values(SweepParam::Processors, "2, 4,8").unwrap(), vec![2.0, 4.0, 8.0]);
        assert!("Q".parse::<SweepParam>().is_err());
        let s = Scenario::parse(STAGGERED).unwrap();
        assert_eq!(sweep(&s, SweepParam::Jobs, &[3.0], None).unwrap_err().exit_code(), 2);
        assert_eq!(sweep(&s, SweepParam::Alpha, &[], None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn game_sweep_meets_lower_bound() {
        let s = Scenario::parse("alpha = 2\nP = 2\n[game robust]\n").unwrap();
        let values = [2.0, 4.0, 8.0, 16.0, 32.0];
        let r = sweep(&s, SweepParam::Processors, &values, None).unwrap();
        assert!(r.all_ok);
        for (i, p) in values.iter().enumerate() {
            let ratio: f64 = field(&r.csv, i, "ratio").parse().unwrap();
            let bound = 0.5 * crate::model::harmonic(*p as usize).sqrt();
            assert!(ratio >= bound * (1.0 - 1e-9), "P={p}: {ratio} < {bound}");
        }
    }

    #[test]
    fn bounds_and_game_tables() {
        let s = Scenario::parse("alpha = 2\nP = 4\n[instance one]\njob = 4@4\n[instance two]\njob = 1@2\n[game g]\n").unwrap();
        let b = bounds(&s, None).unwrap();
        assert_eq!(b.csv, format!("{BOUNDS_HEADER}\none,2,4,1,4,\ntwo,2,4,1,1.41421356237,\n"));

        let g = game(&PowerParams::new(2.0, 4).unwrap(), None).unwrap();
        assert!(g.all_ok);
        assert_eq!(g.csv.lines().count(), 5);
        assert_eq!(g.csv.lines().filter(|l| l.contains(",true,")).count(), 1);
    }

    #[test]
    fn seed_override_changes_random_sections_only() {
        let s = Scenario::parse("alpha = 2\nP = 4\n[generator g]\nkind = uniform-random\nseed = 1\njobs = 4\n").unwrap();
        let a = run(&s, None).unwrap();
        assert_eq!(a, run(&s, Some(1)).unwrap());
        assert_ne!(a, run(&s, Some(2)).unwrap());
    }
}
