//! Experiment grids: configuration, execution, CSV rows and the summary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use super::bounds::{fitted_constant, BoundPoint};
use super::check::{check_trace, CheckContext, Suite, Violation};
use super::HarnessError;
use crate::renaming::{Algorithm, Profile, RenamingOutcome, RenamingSetup};
use crate::simcore::{
    explore, Decision, ExecutionTrace, ExploreConfig, RoundRobin, RunEnd, RunLimits, Scheduler, SeededRandom,
    WithCrashes,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerChoice {
    #[default]
    Random,
    RoundRobin,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Mode {
    /// One run per seed under the chosen scheduler with random crashes.
    #[default]
    Random,
    /// Every interleaving (and crash placement) up to the bounds.
    Exhaustive { step_bound: u64, crash_budget: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub start: u64,
    pub count: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { start: 0, count: 10 }
    }
}

/// A named constant profile, optionally with overridden multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Custom {
        #[serde(default)]
        base: Option<String>,
        #[serde(default)]
        c_w: Option<f64>,
        #[serde(default)]
        c_delta: Option<f64>,
    },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Named("scaled".into())
    }
}

impl ProfileSpec {
    pub fn resolve(&self) -> Result<Profile, HarnessError> {
        let by_name = |name: &str| {
            Profile::by_name(name).ok_or_else(|| HarnessError::Config(format!("unknown profile `{name}`")))
        };
        match self {
            ProfileSpec::Named(name) => by_name(name),
            ProfileSpec::Custom { base, c_w, c_delta } => {
                let mut p = by_name(base.as_deref().unwrap_or("scaled"))?;
                if let Some(c) = c_w {
                    p.constants.c_w = *c;
                }
                if let Some(c) = c_delta {
                    p.constants.c_delta = *c;
                }
                if !(p.constants.c_w > 0.0 && p.constants.c_delta > 0.0) {
                    return Err(HarnessError::Config("profile multipliers must be positive".into()));
                }
                Ok(p)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    /// Directory for the traces of violating runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<PathBuf>,
}

fn default_n() -> Vec<u64> {
    vec![64]
}

fn default_horizon() -> u64 {
    40
}

fn one() -> u64 {
    1
}

/// A renaming experiment over a `(k, N)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub k: Vec<u64>,
    #[serde(rename = "N", default = "default_n")]
    pub n_names: Vec<u64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub scheduler: SchedulerChoice,
    #[serde(default)]
    pub seeds: Seeds,
    /// Crashes per run are drawn from `0..=max_crashes`; defaults to `k - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_crashes: Option<u64>,
    /// Crashes strike within this many events of the start.
    #[serde(default = "default_horizon")]
    pub crash_horizon: u64,
    #[serde(default)]
    pub profile: ProfileSpec,
    /// Repetition `r` runs the seed range shifted by `r · count`.
    #[serde(default = "one")]
    pub repetitions: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, k: Vec<u64>, n_names: Vec<u64>) -> Self {
        Self {
            algorithm,
            k,
            n_names,
            mode: Mode::default(),
            scheduler: SchedulerChoice::default(),
            seeds: Seeds::default(),
            max_crashes: None,
            crash_horizon: default_horizon(),
            profile: ProfileSpec::default(),
            repetitions: 1,
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("bad experiment config: {e}")))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.k.is_empty() || self.n_names.is_empty() {
            return bad("k and N grids must be non-empty".into());
        }
        if let Some(&k) = self.k.iter().find(|&&k| k == 0) {
            return bad(format!("k = {k} is not a contention level"));
        }
        if self.algorithm.uses_n() {
            for &k in &self.k {
                if let Some(&n) = self.n_names.iter().find(|&&n| n < k) {
                    return bad(format!("{} needs N >= k, got N={n}, k={k}", self.algorithm));
                }
            }
        }
        if self.seeds.count == 0 || self.repetitions == 0 {
            return bad("need at least one seed and one repetition".into());
        }
        if let Mode::Exhaustive { step_bound, .. } = self.mode {
            if step_bound == 0 || self.k.iter().any(|&k| k > 4) {
                return bad("exhaustive mode needs a positive step bound and k <= 4".into());
            }
        }
        self.profile.resolve().map(|_| ())
    }

    /// Grid points in output order. Algorithms that ignore `N` use only the
    /// first `N`.
    pub fn grid(&self) -> Vec<(u64, u64)> {
        let ns: &[u64] = if self.algorithm.uses_n() {
            &self.n_names
        } else {
            &self.n_names[..1]
        };
        self.k.iter().flat_map(|&k| ns.iter().map(move |&n| (k, n))).collect()
    }

    fn seed_list(&self) -> Vec<u64> {
        (0..self.repetitions)
            .flat_map(|r| {
                let start = self.seeds.start + r * self.seeds.count;
                start..start + self.seeds.count
            })
            .collect()
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub algo: String,
    pub k: u64,
    #[serde(rename = "N")]
    pub n_names: u64,
    pub n: u64,
    pub seed: u64,
    pub max_steps: u64,
    pub max_name: u64,
    pub range_bound: u64,
    pub registers_used: usize,
    pub violations: usize,
}

/// Violations found in one run, with the trace file they were saved to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunViolations {
    pub k: u64,
    #[serde(rename = "N")]
    pub n_names: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveStats {
    pub k: u64,
    #[serde(rename = "N")]
    pub n_names: u64,
    pub traces: u64,
    pub violating: u64,
    /// Largest number of processes deciding a win or a name in one trace.
    pub max_winners: u64,
    pub line: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub algo: Algorithm,
    pub points: Vec<BoundPoint>,
    pub fitted_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub rows: usize,
    pub violations: Vec<RunViolations>,
    pub report: BoundReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub exhaustive: Vec<ExhaustiveStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<Row>,
    pub summary: ExperimentSummary,
}

impl ExperimentResult {
    pub fn violation_count(&self) -> usize {
        self.rows.iter().map(|r| r.violations).sum()
    }

    pub fn csv(&self) -> Result<String, HarnessError> {
        rows_to_csv(&self.rows)
    }

    pub fn summary_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(&self.summary)? + "\n")
    }

    /// Write the CSV and summary where the config asks for them.
    pub fn write(&self, paths: &OutputPaths) -> Result<(), HarnessError> {
        if let Some(p) = &paths.csv {
            write_file(p, &self.csv()?)?;
        }
        if let Some(p) = &paths.summary {
            write_file(p, &self.summary_json()?)?;
        }
        Ok(())
    }
}

pub fn rows_to_csv(rows: &[Row]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "algo",
            "k",
            "N",
            "n",
            "seed",
            "max_steps",
            "max_name",
            "range_bound",
            "registers_used",
            "violations",
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Everything wrong with one renaming run: trace invariants, names outside
/// the declared range, survivors left undecided.
pub fn renaming_violations(outcome: &RenamingOutcome, trace: &ExecutionTrace) -> Vec<Violation> {
    let mut out = check_trace(trace, Suite::Renaming, &CheckContext::default());
    let last = trace.events.last().map_or(0, |e| e.seq);
    for a in &outcome.assignments {
        if let Some(x) = a.name.filter(|&x| x == 0 || x > outcome.range_bound) {
            out.push(Violation {
                event: last,
                invariant: "range".into(),
                message: format!("slot {} named {x}, outside [1, {}]", a.slot.0, outcome.range_bound),
            });
        }
        if !a.crashed && outcome.end == RunEnd::AllHalted && outcome.algorithm.names_everyone() && a.name.is_none() {
            out.push(Violation {
                event: last,
                invariant: "termination".into(),
                message: format!("slot {} finished without a name", a.slot.0),
            });
        }
    }
    if outcome.end != RunEnd::AllHalted {
        out.push(Violation {
            event: last,
            invariant: "termination".into(),
            message: format!("run ended with {:?}", outcome.end),
        });
    }
    out
}

/// One seeded run: originals and crash plan are derived from the seed.
pub fn run_renaming_seed(
    setup: &RenamingSetup,
    seed: u64,
    scheduler: SchedulerChoice,
    max_crashes: u64,
    horizon: u64,
) -> Result<(RenamingOutcome, ExecutionTrace), HarnessError> {
    let originals = setup.originals(seed);
    let n = originals.len();
    let mut sched: Box<dyn Scheduler> = match scheduler {
        SchedulerChoice::Random => Box::new(WithCrashes::random(
            SeededRandom::new(seed),
            n,
            max_crashes as usize,
            horizon,
            seed,
        )),
        SchedulerChoice::RoundRobin => Box::new(WithCrashes::random(
            RoundRobin::default(),
            n,
            max_crashes as usize,
            horizon,
            seed,
        )),
    };
    Ok(setup.run(&originals, &mut sched, RunLimits::default())?)
}

struct RunResult {
    row: Row,
    violations: Option<RunViolations>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let profile = config.profile.resolve()?;
    let grid = config.grid();
    let setups = grid
        .iter()
        .map(|&(k, n)| RenamingSetup::new(config.algorithm, k, n, &profile))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut exhaustive = Vec::new();
    match config.mode {
        Mode::Random => {
            let seeds = config.seed_list();
            let jobs: Vec<(usize, u64)> = (0..setups.len())
                .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
                .collect();
            let results = jobs
                .par_iter()
                .map(|&(i, seed)| random_run(config, &setups[i], seed))
                .collect::<Result<Vec<_>, _>>()?;
            for r in results {
                rows.push(r.row);
                violations.extend(r.violations);
            }
        }
        Mode::Exhaustive {
            step_bound,
            crash_budget,
        } => {
            let cfg = ExploreConfig::new(step_bound, crash_budget);
            for setup in &setups {
                let (row, stats, found) = exhaustive_run(config, setup, &cfg)?;
                rows.push(row);
                exhaustive.push(stats);
                violations.extend(found);
            }
        }
    }
    let points = setups
        .iter()
        .map(|s| {
            let mine: Vec<&Row> = rows.iter().filter(|r| r.k == s.k && r.n_names == s.n_names).collect();
            BoundPoint::new(
                config.algorithm,
                s.k,
                s.n_names,
                mine.len() as u64,
                mine.iter().map(|r| r.max_steps).max().unwrap_or(0),
                mine.iter().map(|r| r.max_name).max().unwrap_or(0),
                s.range_bound,
                s.registers,
            )
        })
        .collect::<Vec<_>>();
    let report = BoundReport {
        algo: config.algorithm,
        fitted_c: fitted_constant(&points),
        points,
    };
    let result = ExperimentResult {
        summary: ExperimentSummary {
            config: config.clone(),
            rows: rows.len(),
            violations,
            report,
            exhaustive,
        },
        rows,
    };
    result.write(&config.output)?;
    Ok(result)
}

fn row(setup: &RenamingSetup, seed: u64, max_steps: u64, max_name: u64, violations: usize) -> Row {
    Row {
        algo: setup.algorithm.name().to_string(),
        k: setup.k,
        n_names: setup.n_names,
        n: setup.k,
        seed,
        max_steps,
        max_name,
        range_bound: setup.range_bound,
        registers_used: setup.registers,
        violations,
    }
}

fn save_trace(
    dir: Option<&PathBuf>,
    setup: &RenamingSetup,
    seed: u64,
    trace: &ExecutionTrace,
) -> Result<Option<PathBuf>, HarnessError> {
    let Some(dir) = dir else { return Ok(None) };
    let path = dir.join(format!(
        "{}-k{}-N{}-seed{}.jsonl",
        setup.algorithm, setup.k, setup.n_names, seed
    ));
    write_file(&path, &trace.to_jsonl())?;
    Ok(Some(path))
}

fn random_run(config: &ExperimentConfig, setup: &RenamingSetup, seed: u64) -> Result<RunResult, HarnessError> {
    let max_crashes = config.max_crashes.unwrap_or(setup.k - 1).min(setup.k - 1);
    let (outcome, trace) = run_renaming_seed(setup, seed, config.scheduler, max_crashes, config.crash_horizon)?;
    let found = renaming_violations(&outcome, &trace);
    let violations = if found.is_empty() {
        None
    } else {
        Some(RunViolations {
            k: setup.k,
            n_names: setup.n_names,
            seed,
            trace: save_trace(config.output.traces.as_ref(), setup, seed, &trace)?,
            violations: found.clone(),
        })
    };
    Ok(RunResult {
        row: row(
            setup,
            seed,
            outcome.max_steps(),
            outcome.max_name.unwrap_or(0),
            found.len(),
        ),
        violations,
    })
}

fn exhaustive_run(
    config: &ExperimentConfig,
    setup: &RenamingSetup,
    cfg: &ExploreConfig,
) -> Result<(Row, ExhaustiveStats, Option<RunViolations>), HarnessError> {
    let seed = config.seeds.start;
    let originals = setup.originals(seed);
    let sim = setup.simulation(&originals)?;
    let (mut max_steps, mut max_name, mut max_winners) = (0, 0, 0);
    let (mut violating, mut count) = (0u64, 0usize);
    let mut first: Option<(Vec<Violation>, ExecutionTrace)> = None;
    let stats = explore(&sim, cfg, |s| {
        let trace = s.trace();
        let found = check_trace(trace, Suite::Renaming, &CheckContext::default());
        max_steps = max_steps.max(trace.max_steps());
        let winners = trace
            .decisions()
            .filter(|(_, d)| matches!(d, Decision::Win { .. } | Decision::Name(_)))
            .count() as u64;
        max_winners = max_winners.max(winners);
        for (_, d) in trace.decisions() {
            if let Decision::Name(x) = d {
                max_name = max_name.max(*x);
            }
        }
        if !found.is_empty() {
            violating += 1;
            count += found.len();
            if first.is_none() {
                first = Some((found, trace.clone()));
            }
        }
    })?;
    let violations = match first {
        Some((found, trace)) => Some(RunViolations {
            k: setup.k,
            n_names: setup.n_names,
            seed,
            trace: save_trace(config.output.traces.as_ref(), setup, seed, &trace)?,
            violations: found,
        }),
        None => None,
    };
    let what = if setup.algorithm == crate::renaming::Algorithm::Compete {
        "winners"
    } else {
        "names"
    };
    let line = if violating == 0 {
        format!("traces: {}, {what} unique in all", stats.traces)
    } else {
        format!("traces: {}, {what} repeated in {violating}", stats.traces)
    };
    Ok((
        row(setup, seed, max_steps, max_name, count),
        ExhaustiveStats {
            k: setup.k,
            n_names: setup.n_names,
            traces: stats.traces,
            violating,
            max_winners,
            line,
        },
        violations,
    ))
}
