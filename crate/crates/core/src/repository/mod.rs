//! Unbounded selection: repositories over infinitely many dedicated
//! registers, and unbounded naming.
//!
//! Registers are laid out as the `n × n` Help matrix, then `n` availability
//! boards of `2n` registers each, then the dedicated registers `R_1, R_2, …`
//! in the lazily materialized tail of the memory. `W` is snapshot object 0.

mod machines;
mod naming;

pub use machines::{AltruisticDepositor, NamingMachine, SelfishDepositor};
pub use naming::{board_allows, board_read_order, choose_by_rank, Acquire, Confirm, LocalNamingState, VerifyList};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::simcore::{
    Decision, Directive, EventKind, ExecutionTrace, RegisterId, RoundRobin, RunEnd, RunLimits, Scheduler, SharedMemory,
    SimError, Simulation, Slot, SnapshotId, StepMachine, Value,
};

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("query by process {0} before its previous request was acknowledged")]
    Pipelining(u32),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepoAlgorithm {
    Selfish,
    Altruistic,
    Naming,
}

impl RepoAlgorithm {
    pub const ALL: [RepoAlgorithm; 3] = [RepoAlgorithm::Selfish, RepoAlgorithm::Altruistic, RepoAlgorithm::Naming];

    pub fn name(self) -> &'static str {
        match self {
            RepoAlgorithm::Selfish => "selfish",
            RepoAlgorithm::Altruistic => "altruistic",
            RepoAlgorithm::Naming => "naming",
        }
    }

    /// Bound on the integers left unused: `n - 1` for the non-blocking
    /// algorithms, `n(n - 1)` for the wait-free one.
    pub fn waste_bound(self, n: usize) -> u64 {
        let n = n as u64;
        match self {
            RepoAlgorithm::Selfish | RepoAlgorithm::Naming => n - 1,
            RepoAlgorithm::Altruistic => n * (n - 1),
        }
    }
}

impl fmt::Display for RepoAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepoAlgorithm {
    type Err = RepositoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RepoAlgorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| RepositoryError::Config(format!("unknown repository algorithm `{s}`")))
    }
}

/// Register addresses of a repository for `n` processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoLayout {
    pub n: usize,
    pub w: SnapshotId,
    pub help_base: usize,
    pub boards_base: usize,
    pub dedicated_base: usize,
}

impl RepoLayout {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one process");
        Self {
            n,
            w: SnapshotId(0),
            help_base: 0,
            boards_base: n * n,
            dedicated_base: n * n + n * 2 * n,
        }
    }

    /// `Help[i, j]`: written with names by `i`, cleared by `j`.
    pub fn help(&self, i: Slot, j: Slot) -> RegisterId {
        RegisterId(self.help_base + i.index() * self.n + j.index())
    }

    pub fn board_len(&self) -> usize {
        2 * self.n
    }

    /// Register `idx` of `p`'s board: list entries, then the pointer.
    pub fn board(&self, p: Slot, idx: usize) -> RegisterId {
        RegisterId(self.boards_base + p.index() * self.board_len() + idx)
    }

    /// Dedicated register `R_i`, `i >= 1`.
    pub fn dedicated(&self, i: u64) -> RegisterId {
        assert!(i >= 1, "dedicated registers start at R_1");
        RegisterId(self.dedicated_base + i as usize - 1)
    }

    pub fn dedicated_index(&self, reg: RegisterId) -> Option<u64> {
        (reg.0 >= self.dedicated_base).then(|| (reg.0 - self.dedicated_base) as u64 + 1)
    }

    pub fn memory(&self) -> SharedMemory {
        SharedMemory::new(self.dedicated_base, self.n).with_unbounded_tail()
    }
}

/// Read-only view of the dedicated registers of a memory.
#[derive(Clone, Copy, Debug)]
pub struct DedicatedStore<'a> {
    layout: RepoLayout,
    memory: &'a SharedMemory,
}

impl<'a> DedicatedStore<'a> {
    pub fn new(layout: RepoLayout, memory: &'a SharedMemory) -> Self {
        Self { layout, memory }
    }

    pub fn get(&self, i: u64) -> Value {
        self.memory.read(self.layout.dedicated(i)).unwrap_or_default()
    }

    /// Highest index holding a value, 0 if none.
    pub fn frontier(&self) -> u64 {
        let regs = self.memory.registers();
        (self.layout.dedicated_base..regs.len())
            .rev()
            .find(|&r| !regs[r].is_null())
            .map_or(0, |r| (r - self.layout.dedicated_base) as u64 + 1)
    }

    pub fn empty_below_frontier(&self) -> Vec<u64> {
        (1..self.frontier()).filter(|&i| self.get(i).is_null()).collect()
    }
}

/// A process's queue of values to deposit (or, for naming, of requests).
/// Enforces the no-pipelining rule: no query while a returned value is
/// still unacknowledged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RequestScript {
    process: u32,
    values: VecDeque<u64>,
    in_flight: bool,
}

impl RequestScript {
    pub fn new(process: u32, values: impl IntoIterator<Item = u64>) -> Self {
        Self {
            process,
            values: values.into_iter().collect(),
            in_flight: false,
        }
    }

    /// Next value, or `None` once the script is exhausted.
    pub fn query(&mut self) -> Result<Option<u64>, RepositoryError> {
        if self.in_flight {
            return Err(RepositoryError::Pipelining(self.process));
        }
        let v = self.values.pop_front();
        self.in_flight = v.is_some();
        Ok(v)
    }

    pub fn ack(&mut self) {
        self.in_flight = false;
    }

    pub fn remaining(&self) -> usize {
        self.values.len()
    }
}

/// Parse a deposit script: `D <p> <v>` queues value `v` at process `p`;
/// `R <p> <count> <start>` queues `start, start + 1, …`. `#` starts a
/// comment, `;` separates requests on a line.
pub fn parse_deposits(text: &str, n: usize) -> Result<Vec<Vec<u64>>, RepositoryError> {
    let mut out = vec![Vec::new(); n];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for part in line.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || {
                RepositoryError::Sim(SimError::Parse {
                    line: lineno + 1,
                    message: format!("expected `D <p> <v>` or `R <p> <count> <start>`, got `{part}`"),
                })
            };
            let f: Vec<&str> = part.split_whitespace().collect();
            let nums: Vec<u64> = f[1..]
                .iter()
                .map(|s| s.parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            let p = *nums.first().ok_or_else(bad)? as usize;
            if p == 0 || p > n {
                return Err(RepositoryError::Config(format!(
                    "line {}: process {p} outside 1..={n}",
                    lineno + 1
                )));
            }
            match (f[0], nums.len()) {
                ("D", 2) => out[p - 1].push(nums[1]),
                ("R", 3) => out[p - 1].extend(nums[2]..nums[2] + nums[1]),
                _ => return Err(bad()),
            }
        }
    }
    Ok(out)
}

/// A repository or naming algorithm for `n` processes.
#[derive(Clone, Copy, Debug)]
pub struct Repository {
    pub algo: RepoAlgorithm,
    pub layout: RepoLayout,
}

impl Repository {
    pub fn new(algo: RepoAlgorithm, n: usize) -> Result<Self, RepositoryError> {
        if n == 0 {
            return Err(RepositoryError::Config("need at least one process".into()));
        }
        Ok(Self {
            algo,
            layout: RepoLayout::new(n),
        })
    }

    /// Defaults for a run to quiescence: altruistic machines never halt, so
    /// the run stops once every live one idled through a few full rows.
    pub fn limits(&self) -> RunLimits {
        RunLimits {
            max_events: 50_000_000,
            quiescence_window: Some(2 * self.layout.n as u64 + 2),
        }
    }

    /// One machine per script (slot `i + 1` runs `scripts[i]`).
    pub fn machines(&self, scripts: &[Vec<u64>]) -> Vec<Box<dyn StepMachine>> {
        scripts
            .iter()
            .enumerate()
            .map(|(i, values)| {
                let me = Slot::from_index(i);
                let script = RequestScript::new(me.0, values.iter().copied());
                match self.algo {
                    RepoAlgorithm::Selfish => {
                        Box::new(SelfishDepositor::new(me, self.layout, script)) as Box<dyn StepMachine>
                    }
                    RepoAlgorithm::Altruistic => Box::new(AltruisticDepositor::new(me, self.layout, script)),
                    RepoAlgorithm::Naming => Box::new(NamingMachine::new(me, self.layout, script)),
                }
            })
            .collect()
    }

    pub fn simulation(&self, scripts: &[Vec<u64>]) -> Result<Simulation, RepositoryError> {
        if scripts.len() != self.layout.n {
            return Err(RepositoryError::Config(format!(
                "{} scripts for {} processes",
                scripts.len(),
                self.layout.n
            )));
        }
        Ok(Simulation::new(self.layout.memory(), self.machines(scripts))?)
    }

    pub fn run<S: Scheduler + ?Sized>(
        &self,
        scripts: &[Vec<u64>],
        scheduler: &mut S,
        limits: RunLimits,
    ) -> Result<(RepositoryReport, ExecutionTrace), RepositoryError> {
        let mut sim = self.simulation(scripts)?;
        let end = sim.run(scheduler, limits)?;
        let report = self.report(&sim, end);
        Ok((report, sim.into_trace()))
    }

    /// Whether every `Help` entry holds a name.
    pub fn help_full(&self, memory: &SharedMemory) -> bool {
        let n = self.layout.n;
        (0..n * n).all(|c| {
            let reg = self.layout.help(Slot::from_index(c / n), Slot::from_index(c % n));
            memory.read(reg).is_ok_and(|v| !v.is_null())
        })
    }

    /// Worst case for altruistic waste: run under a seeded random schedule
    /// until the whole Help matrix holds names, crash everyone but
    /// `survivor`, then run the survivor alone to quiescence.
    pub fn run_full_help_then_crash(
        &self,
        scripts: &[Vec<u64>],
        survivor: Slot,
        seed: u64,
    ) -> Result<HelpCrashRun, RepositoryError> {
        let limits = self.limits();
        let mut sim = self.simulation(scripts)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while !self.help_full(sim.memory()) {
            if sim.trace().len() as u64 >= limits.max_events {
                return Err(RepositoryError::Config(format!(
                    "Help matrix still not full after {} events",
                    limits.max_events
                )));
            }
            let Some(&slot) = sim.runnable().choose(&mut rng) else {
                return Err(RepositoryError::Config(
                    "every process stopped before Help filled".into(),
                ));
            };
            sim.apply(Directive::Activate(slot))?;
        }
        let filled_at = sim.trace().len() as u64;
        let acked_before = sim.trace().decisions().filter(|(s, _)| *s == survivor).count();
        for slot in (0..self.layout.n).map(Slot::from_index).filter(|&s| s != survivor) {
            sim.apply(Directive::Crash(slot))?;
        }
        let steps_before = sim.trace().steps(survivor);
        let end = sim.run(&mut RoundRobin::default(), limits)?;
        let report = self.report(&sim, end);
        let survivor_steps = sim.trace().steps(survivor) - steps_before;
        let acked_after = sim.trace().decisions().filter(|(s, _)| *s == survivor).count();
        Ok(HelpCrashRun {
            report,
            trace: sim.into_trace(),
            filled_at,
            survivor_acks: (acked_after - acked_before) as u64,
            survivor_steps,
        })
    }

    pub fn report(&self, sim: &Simulation, end: RunEnd) -> RepositoryReport {
        let trace = sim.trace();
        let crashed: BTreeSet<Slot> = trace.crashed().into_iter().collect();
        let mut deposits = Vec::new();
        let mut commits = Vec::new();
        let mut op_steps: Vec<Vec<u64>> = vec![Vec::new(); self.layout.n];
        let mut running = vec![0u64; self.layout.n];
        for e in &trace.events {
            let i = e.slot.index();
            if e.kind.is_step() {
                running[i] += 1;
            }
            match e.decision() {
                Some(Decision::Ack { register, value }) => {
                    deposits.push(DepositRecord {
                        slot: e.slot.0,
                        index: self.layout.dedicated_index(*register).unwrap_or(0),
                        value: *value,
                        seq: e.seq,
                    });
                }
                Some(Decision::Commit(x)) => commits.push(CommitRecord {
                    slot: e.slot.0,
                    name: *x,
                    seq: e.seq,
                }),
                _ => {}
            }
            if e.kind == EventKind::Decide {
                op_steps[i].push(std::mem::take(&mut running[i]));
            }
        }
        let (frontier, unused, pending) = match self.algo {
            RepoAlgorithm::Naming => {
                let names: BTreeSet<u64> = commits.iter().map(|c| c.name).collect();
                let frontier = names.last().copied().unwrap_or(0);
                let unused = (1..frontier).filter(|x| !names.contains(x)).collect();
                (frontier, unused, Vec::new())
            }
            RepoAlgorithm::Selfish | RepoAlgorithm::Altruistic => {
                let store = DedicatedStore::new(self.layout, sim.memory());
                let mut pending = Vec::new();
                if self.algo == RepoAlgorithm::Altruistic {
                    for q in (0..self.layout.n)
                        .map(Slot::from_index)
                        .filter(|q| !crashed.contains(q))
                    {
                        for r in (0..self.layout.n).map(Slot::from_index) {
                            if let Ok(Value::Int(x)) = sim.memory().read(self.layout.help(r, q)) {
                                pending.push(x);
                            }
                        }
                    }
                    pending.sort_unstable();
                }
                (store.frontier(), store.empty_below_frontier(), pending)
            }
        };
        let waste = unused.iter().filter(|x| !pending.contains(x)).count() as u64;
        let processes = (0..self.layout.n)
            .map(|i| {
                let slot = Slot::from_index(i);
                let mut histogram = BTreeMap::new();
                for &s in &op_steps[i] {
                    *histogram.entry(s).or_insert(0u64) += 1;
                }
                ProcessStats {
                    slot: slot.0,
                    crashed: crashed.contains(&slot),
                    steps: trace.steps(slot),
                    operations: op_steps[i].len() as u64,
                    max_op_steps: op_steps[i].iter().copied().max().unwrap_or(0),
                    histogram,
                }
            })
            .collect();
        RepositoryReport {
            algo: self.algo,
            n: self.layout.n,
            deposits,
            commits,
            frontier,
            unused,
            pending,
            waste,
            waste_bound: self.algo.waste_bound(self.layout.n),
            processes,
            end,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositRecord {
    pub slot: u32,
    /// Index `i` of the dedicated register `R_i`.
    pub index: u64,
    pub value: u64,
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub slot: u32,
    pub name: u64,
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessStats {
    pub slot: u32,
    pub crashed: bool,
    pub steps: u64,
    /// Completed operations (acks, commits).
    pub operations: u64,
    pub max_op_steps: u64,
    /// Steps per completed operation → number of operations.
    pub histogram: BTreeMap<u64, u64>,
}

/// Outcome of [`Repository::run_full_help_then_crash`].
#[derive(Clone, Debug)]
pub struct HelpCrashRun {
    pub report: RepositoryReport,
    pub trace: ExecutionTrace,
    /// Events until the Help matrix was full.
    pub filled_at: u64,
    /// Deposits the survivor completed after the crashes.
    pub survivor_acks: u64,
    /// Steps the survivor took after the crashes.
    pub survivor_steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryReport {
    pub algo: RepoAlgorithm,
    pub n: usize,
    pub deposits: Vec<DepositRecord>,
    pub commits: Vec<CommitRecord>,
    /// Highest dedicated register written, or highest integer committed.
    pub frontier: u64,
    /// Empty dedicated registers (uncommitted integers) below the frontier.
    pub unused: Vec<u64>,
    /// Names parked in the Help column of a live process, still to be used.
    pub pending: Vec<u64>,
    /// Unused entries that are not pending.
    pub waste: u64,
    pub waste_bound: u64,
    pub processes: Vec<ProcessStats>,
    pub end: RunEnd,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_regions_are_disjoint() {
        let l = RepoLayout::new(3);
        assert_eq!(l.help(Slot(3), Slot(3)), RegisterId(8));
        assert_eq!(l.board(Slot(1), 0), RegisterId(9));
        assert_eq!(l.board(Slot(3), 5), RegisterId(9 + 17));
        assert_eq!(l.dedicated(1), RegisterId(27));
        assert_eq!(l.dedicated_index(RegisterId(30)), Some(4));
        assert_eq!(l.dedicated_index(RegisterId(26)), None);
    }

    #[test]
    fn deposit_scripts() {
        let s = parse_deposits("D 1 5; R 2 3 10\n# x\nD 1 6", 2).unwrap();
        assert_eq!(s, vec![vec![5, 6], vec![10, 11, 12]]);
        assert!(parse_deposits("D 3 1", 2).is_err());
        assert!(parse_deposits("D 1", 2).is_err());
        assert!(parse_deposits("Q 1 1", 2).is_err());
    }
}
