//! Line-oriented scenario files.
//!
//! ```text
//! alpha = 2
//! P = 4
//! policies = nequi, uceq
//!
//! [instance pair]
//! job = 0: 4@4, 1@inf
//! job = 1: 2@1
//!
//! [generator rnd]
//! kind = uniform-random
//! seed = 7
//! jobs = 5
//! ```
//!
//! See `docs/scenario-format.md` for the full grammar.

use std::path::Path;

use super::generator::RandomSpec;
use super::CliError;
use crate::analysis::Objective;
use crate::model::{Instance, Job, JobId, Phase, PowerParams};
use crate::policies::PolicyKind;

/// Settings that a section may override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub alpha: Option<f64>,
    pub processors: Option<u32>,
    pub policies: Option<Vec<PolicyKind>>,
    pub objectives: Option<Vec<Objective>>,
}

impl Settings {
    fn overlay(&self, over: &Settings) -> Settings {
        Settings {
            alpha: over.alpha.or(self.alpha),
            processors: over.processors.or(self.processors),
            policies: over.policies.clone().or_else(|| self.policies.clone()),
            objectives: over.objectives.clone().or_else(|| self.objectives.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Inline(Vec<Job>),
    Staggered,
    Random(RandomSpec),
    /// Without a budget the game is played at the balanced power `1/(alpha-1)`.
    Game { budget: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub id: String,
    /// Line of the section header.
    pub line: usize,
    pub settings: Settings,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub defaults: Settings,
    pub output: Option<String>,
    pub sections: Vec<Section>,
}

/// A section with every setting filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub id: String,
    pub params: PowerParams,
    pub policies: Vec<PolicyKind>,
    pub objectives: Option<Vec<Objective>>,
    pub source: Source,
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> CliError {
    CliError::Parse { line, field: field.to_string(), message: message.into() }
}

fn parse_f64(line: usize, field: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = v.parse().map_err(|_| parse_err(line, field, format!("`{v}` is not a number")))?;
    if x.is_nan() {
        return Err(parse_err(line, field, "NaN is not allowed"));
    }
    Ok(x)
}

fn parse_int<T: std::str::FromStr>(line: usize, field: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| parse_err(line, field, format!("`{v}` is not a non-negative integer")))
}

fn parse_range<T: Copy>(
    line: usize,
    field: &str,
    v: &str,
    one: impl Fn(usize, &str, &str) -> Result<T, CliError>,
) -> Result<(T, T), CliError> {
    match v.split_once("..") {
        Some((a, b)) => Ok((one(line, field, a.trim())?, one(line, field, b.trim())?)),
        None => {
            let x = one(line, field, v)?;
            Ok((x, x))
        }
    }
}

fn parse_alpha(line: usize, v: &str) -> Result<f64, CliError> {
    let a = parse_f64(line, "alpha", v)?;
    PowerParams::new(a, 1).map_err(|e| parse_err(line, "alpha", e.to_string()))?;
    Ok(a)
}

fn parse_processors(line: usize, v: &str) -> Result<u32, CliError> {
    let p: u32 = parse_int(line, "P", v)?;
    if p == 0 {
        return Err(parse_err(line, "P", "P must be at least 1"));
    }
    Ok(p)
}

fn parse_list<T>(line: usize, field: &str, v: &str, one: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(parse_err(line, field, "empty list"));
    }
    items
        .into_iter()
        .map(|s| one(s).ok_or_else(|| parse_err(line, field, format!("unknown value `{s}`"))))
        .collect()
}

/// `<release>: <work>@<parallelism>, ...`; the release defaults to 0.
fn parse_job(line: usize, id: u32, v: &str) -> Result<Job, CliError> {
    let (release, phases) = match v.split_once(':') {
        Some((r, rest)) => (parse_f64(line, "job", r.trim())?, rest),
        None => (0.0, v),
    };
    let mut out = Vec::new();
    for item in phases.split(',').map(str::trim) {
        let (w, h) = item
            .split_once('@')
            .ok_or_else(|| parse_err(line, "job", format!("phase `{item}` is not <work>@<parallelism>")))?;
        let w = parse_f64(line, "job", w.trim())?;
        let h = match h.trim() {
            "inf" | "Inf" | "INF" => f64::INFINITY,
            s => parse_f64(line, "job", s)?,
        };
        out.push(Phase::new(w, h).map_err(|e| parse_err(line, "job", e.to_string()))?);
    }
    Job::new(JobId(id), release, out).map_err(|e| parse_err(line, "job", e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Instance,
    Generator,
    Game,
}

struct Builder {
    kind: Kind,
    id: String,
    line: usize,
    settings: Settings,
    seen: Vec<String>,
    jobs: Vec<Job>,
    generator: Option<String>,
    random: RandomSpec,
    seed: Option<u64>,
    budget: Option<f64>,
}

impl Builder {
    fn new(kind: Kind, id: String, line: usize) -> Self {
        Self {
            kind,
            id,
            line,
            settings: Settings::default(),
            seen: Vec::new(),
            jobs: Vec::new(),
            generator: None,
            random: RandomSpec::default(),
            seed: None,
            budget: None,
        }
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), CliError> {
        if key != "job" {
            if self.seen.iter().any(|k| k == key) {
                return Err(parse_err(line, key, "duplicate field"));
            }
            self.seen.push(key.to_string());
        }
        if set_common(&mut self.settings, line, key, v)? {
            return Ok(());
        }
        let random_key = |b: &Self| {
            if b.kind != Kind::Generator {
                Err(parse_err(line, key, format!("field not allowed in [{}] sections", kind_name(b.kind))))
            } else {
                Ok(())
            }
        };
        match (self.kind, key) {
            (Kind::Instance, "job") => {
                let id = self.jobs.len() as u32;
                self.jobs.push(parse_job(line, id, v)?);
            }
            (Kind::Game, "budget") => {
                let b = parse_f64(line, key, v)?;
                if !(b > 0.0) || !b.is_finite() {
                    return Err(parse_err(line, key, "budget must be positive and finite"));
                }
                self.budget = Some(b);
            }
            (Kind::Generator, "kind") => match v {
                "staggered" | "theorem5" => self.generator = Some("staggered".to_string()),
                "uniform-random" => self.generator = Some(v.to_string()),
                _ => return Err(parse_err(line, key, format!("unknown generator `{v}`"))),
            },
            (_, "seed") => {
                random_key(self)?;
                self.seed = Some(parse_int(line, key, v)?);
            }
            (_, "jobs") => {
                random_key(self)?;
                self.random.jobs = parse_int(line, key, v)?;
            }
            (_, "phases") => {
                random_key(self)?;
                self.random.phases = parse_range(line, key, v, parse_int)?;
            }
            (_, "work") => {
                random_key(self)?;
                self.random.work = parse_range(line, key, v, parse_f64)?;
            }
            (_, "parallelism") => {
                random_key(self)?;
                self.random.parallelism = parse_range(line, key, v, parse_int)?;
            }
            (_, "fully_parallel") => {
                random_key(self)?;
                self.random.fully_parallel = parse_f64(line, key, v)?;
            }
            (_, "release_spread") => {
                random_key(self)?;
                self.random.release_spread = parse_f64(line, key, v)?;
            }
            (_, "parseq") => {
                random_key(self)?;
                self.random.parseq = match v {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(parse_err(line, key, format!("`{v}` is not a boolean"))),
                };
            }
            _ => return Err(parse_err(line, key, "unknown field")),
        }
        Ok(())
    }

    fn finish(self) -> Result<Section, CliError> {
        let source = match self.kind {
            Kind::Instance => {
                if self.jobs.is_empty() {
                    return Err(parse_err(self.line, "job", format!("instance `{}` has no jobs", self.id)));
                }
                Source::Inline(self.jobs)
            }
            Kind::Game => Source::Game { budget: self.budget },
            Kind::Generator => match self.generator.as_deref() {
                None => return Err(parse_err(self.line, "kind", format!("generator `{}` has no kind", self.id))),
                Some("staggered") => {
                    let extra = self
                        .seen
                        .iter()
                        .find(|k| !matches!(k.as_str(), "kind" | "alpha" | "P" | "policies" | "objectives"));
                    if let Some(k) = extra {
                        return Err(parse_err(self.line, k, "field not used by the staggered generator"));
                    }
                    Source::Staggered
                }
                Some(_) => {
                    let seed = self.seed.ok_or_else(|| {
                        parse_err(self.line, "seed", format!("generator `{}` needs a seed", self.id))
                    })?;
                    let spec = RandomSpec { seed, ..self.random };
                    spec.validate().map_err(|m| parse_err(self.line, &self.id, m))?;
                    Source::Random(spec)
                }
            },
        };
        Ok(Section { id: self.id, line: self.line, settings: self.settings, source })
    }
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Instance => "instance",
        Kind::Generator => "generator",
        Kind::Game => "game",
    }
}

fn set_common(s: &mut Settings, line: usize, key: &str, v: &str) -> Result<bool, CliError> {
    match key {
        "alpha" => s.alpha = Some(parse_alpha(line, v)?),
        "P" => s.processors = Some(parse_processors(line, v)?),
        "policies" => s.policies = Some(parse_list(line, key, v, |x| x.parse().ok())?),
        "objectives" => s.objectives = Some(parse_list(line, key, v, |x| x.parse().ok())?),
        _ => return Ok(false),
    }
    Ok(true)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut defaults = Settings::default();
        let mut output = None;
        let mut top_seen: Vec<String> = Vec::new();
        let mut sections = Vec::new();
        let mut current: Option<Builder> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(header) = content.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(line, "section", "missing `]`"))?
                    .trim();
                let mut words = header.split_whitespace();
                let kind = match words.next() {
                    Some("instance") => Kind::Instance,
                    Some("generator") => Kind::Generator,
                    Some("game") => Kind::Game,
                    other => {
                        return Err(parse_err(
                            line,
                            "section",
                            format!("unknown section kind `{}`", other.unwrap_or("")),
                        ))
                    }
                };
                let id = match words.next() {
                    Some(n) => n.to_string(),
                    None => format!("{}{}", kind_name(kind), sections.len() + usize::from(current.is_some()) + 1),
                };
                if words.next().is_some() {
                    return Err(parse_err(line, "section", "section names may not contain spaces"));
                }
                if !id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
                    return Err(parse_err(line, "section", format!("invalid section name `{id}`")));
                }
                if let Some(b) = current.take() {
                    sections.push(b.finish()?);
                }
                if sections.iter().any(|s: &Section| s.id == id) {
                    return Err(parse_err(line, "section", format!("duplicate section name `{id}`")));
                }
                current = Some(Builder::new(kind, id, line));
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, content, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(parse_err(line, key, "missing value"));
            }
            match current.as_mut() {
                Some(b) => b.set(line, key, value)?,
                None => {
                    if top_seen.iter().any(|k| k == key) {
                        return Err(parse_err(line, key, "duplicate field"));
                    }
                    top_seen.push(key.to_string());
                    if key == "output" {
                        output = Some(value.to_string());
                    } else if !set_common(&mut defaults, line, key, value)? {
                        return Err(parse_err(line, key, "unknown field"));
                    }
                }
            }
        }
        if let Some(b) = current.take() {
            sections.push(b.finish()?);
        }
        if sections.is_empty() {
            return Err(parse_err(text.lines().count().max(1), "section", "scenario has no sections"));
        }
        let scenario = Scenario { defaults, output, sections };
        scenario.resolve()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fills in inherited settings; alpha and P must be set somewhere.
    pub fn resolve(&self) -> Result<Vec<Resolved>, CliError> {
        self.sections
            .iter()
            .map(|s| {
                let set = self.defaults.overlay(&s.settings);
                let alpha = set
                    .alpha
                    .ok_or_else(|| parse_err(s.line, "alpha", format!("alpha not set for `{}`", s.id)))?;
                let p = set
                    .processors
                    .ok_or_else(|| parse_err(s.line, "P", format!("P not set for `{}`", s.id)))?;
                let params = PowerParams::new(alpha, p).map_err(|e| parse_err(s.line, "alpha", e.to_string()))?;
                Ok(Resolved {
                    id: s.id.clone(),
                    params,
                    policies: set.policies.unwrap_or_else(|| vec![PolicyKind::Nequi, PolicyKind::Uceq]),
                    objectives: set.objectives,
                    source: s.source.clone(),
                })
            })
            .collect()
    }

    /// Replaces alpha everywhere.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut s = self.clone();
        s.defaults.alpha = Some(alpha);
        for sec in &mut s.sections {
            sec.settings.alpha = None;
        }
        s
    }

    pub fn with_processors(&self, p: u32) -> Self {
        let mut s = self.clone();
        s.defaults.processors = Some(p);
        for sec in &mut s.sections {
            sec.settings.processors = None;
        }
        s
    }

    /// Sets the job count of every random generator; `None` if there is none.
    pub fn with_jobs(&self, n: usize) -> Option<Self> {
        let mut s = self.clone();
        let mut touched = false;
        for sec in &mut s.sections {
            if let Source::Random(spec) = &mut sec.source {
                spec.jobs = n;
                touched = true;
            }
        }
        touched.then_some(s)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        for sec in &mut s.sections {
            if let Source::Random(spec) = &mut sec.source {
                spec.seed = seed;
            }
        }
        s
    }
}

impl Resolved {
    pub fn instance(&self) -> Result<Option<Instance>, CliError> {
        let inst = match &self.source {
            Source::Inline(jobs) => Instance::new(self.params, jobs.clone()),
            Source::Staggered => Ok(crate::adversarial::staggered_sequential_instance(&self.params)),
            Source::Random(spec) => super::generator::random_instance(spec, self.params),
            Source::Game { .. } => return Ok(None),
        };
        inst.map(Some).map_err(|e| CliError::Usage(format!("{}: {e}", self.id)))
    }
}
