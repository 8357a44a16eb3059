//! Renaming algorithms as step machines.
//!
//! Every algorithm is a [`Routine`] that takes an input name and outputs a
//! local name in `[1, names]` (or nothing). Plans fix the register layout
//! and the certified expanders; routines hold the per-process state.

mod adaptive;
mod basic;
mod compete;
mod efficient;
mod ma;
mod majority;
mod polylog;
mod profile;
mod range;
mod snapshot;

pub use adaptive::{Doubling, DoublingPlan, Instance};
pub use basic::{basic_range, ceil_lg, stage_sizes, Basic, BasicPlan};
pub use compete::Compete;
pub use efficient::{Efficient, EfficientPlan};
pub use ma::{cell_name, MaGrid, MaPlan};
pub use majority::{Majority, MajorityStage};
pub use polylog::{polylog_epochs, polylog_threshold, EpochSchedule, Polylog, PolylogPlan};
pub use profile::Profile;
pub use range::{overlapping_blocks, overlapping_ranges, Block, NameRange, RegisterAllocator};
pub use snapshot::{SnapshotPlan, SnapshotRename};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

use crate::expander::ExpanderError;
use crate::simcore::{
    Decision, ExecutionTrace, Oneshot, Poll, RegisterId, Response, Routine, RunEnd, RunLimits, Scheduler, SharedMemory,
    SimError, Simulation, Slot, StepMachine, Value,
};

#[derive(Debug, Error)]
pub enum RenamingError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Expander(#[from] ExpanderError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Compete,
    Majority,
    Basic,
    Polylog,
    Ma,
    Snapshot,
    Efficient,
    AlmostAdaptive,
    Adaptive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Compete,
        Algorithm::Majority,
        Algorithm::Basic,
        Algorithm::Polylog,
        Algorithm::Ma,
        Algorithm::Snapshot,
        Algorithm::Efficient,
        Algorithm::AlmostAdaptive,
        Algorithm::Adaptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Compete => "compete",
            Algorithm::Majority => "majority",
            Algorithm::Basic => "basic",
            Algorithm::Polylog => "polylog",
            Algorithm::Ma => "ma",
            Algorithm::Snapshot => "snapshot",
            Algorithm::Efficient => "efficient",
            Algorithm::AlmostAdaptive => "almost-adaptive",
            Algorithm::Adaptive => "adaptive",
        }
    }

    /// Whether every participant is guaranteed a name (Majority and the
    /// register competition name only some).
    pub fn names_everyone(self) -> bool {
        !matches!(self, Algorithm::Compete | Algorithm::Majority)
    }

    /// Whether original names must come from `[N]`.
    pub fn uses_n(self) -> bool {
        matches!(
            self,
            Algorithm::Majority | Algorithm::Basic | Algorithm::Polylog | Algorithm::AlmostAdaptive
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = RenamingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| RenamingError::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Layout of one renaming algorithm instance.
#[derive(Clone, Debug)]
pub enum Plan {
    Compete { reg: RegisterId, hold: RegisterId },
    Majority(MajorityStage),
    Basic(Arc<BasicPlan>),
    Polylog(Arc<PolylogPlan>),
    Ma(MaPlan),
    Snapshot(SnapshotPlan),
    Efficient(Arc<EfficientPlan>),
    Doubling(Arc<DoublingPlan>),
}

impl Plan {
    pub fn routine(&self, me: Value, input: u64) -> Renamer {
        match self {
            Plan::Compete { reg, hold } => Renamer::Compete(Compete::new(me, *reg, *hold)),
            Plan::Majority(s) => Renamer::Majority(Majority::new(s.clone(), me, input)),
            Plan::Basic(p) => Renamer::Basic(Basic::new(Arc::clone(p), me, input)),
            Plan::Polylog(p) => Renamer::Polylog(Polylog::new(Arc::clone(p), me, input)),
            Plan::Ma(p) => Renamer::Ma(MaGrid::new(*p, me)),
            Plan::Snapshot(p) => Renamer::Snapshot(SnapshotRename::new(*p, input)),
            Plan::Efficient(p) => Renamer::Efficient(Efficient::new(Arc::clone(p), me)),
            Plan::Doubling(p) => Renamer::Doubling(Doubling::new(Arc::clone(p), me, input)),
        }
    }

    /// Size of the full name space of the plan.
    pub fn names(&self) -> u64 {
        match self {
            Plan::Compete { .. } => 1,
            Plan::Majority(s) => s.names(),
            Plan::Basic(p) => p.names(),
            Plan::Polylog(p) => p.names(),
            Plan::Ma(p) => p.names(),
            Plan::Snapshot(p) => p.names,
            Plan::Efficient(p) => p.names(),
            Plan::Doubling(p) => p.names(),
        }
    }

    /// Bound on the steps a process takes once all others stopped moving.
    /// For algorithms without a snapshot finisher this bounds every run.
    pub fn solo_steps(&self) -> u64 {
        match self {
            Plan::Compete { .. } => Compete::MAX_STEPS,
            Plan::Majority(s) => s.max_steps(),
            Plan::Basic(p) => p.max_steps(),
            Plan::Polylog(p) => p.max_steps(),
            Plan::Ma(p) => p.max_steps(),
            Plan::Snapshot(_) => SnapshotPlan::SOLO_SUFFIX_STEPS,
            Plan::Efficient(p) => p.solo_steps(),
            Plan::Doubling(p) => p.solo_steps(),
        }
    }
}

/// Any renaming routine; outputs a local name of its plan.
#[derive(Clone, Debug)]
pub enum Renamer {
    Compete(Compete),
    Majority(Majority),
    Basic(Basic),
    Polylog(Polylog),
    Ma(MaGrid),
    Snapshot(SnapshotRename),
    Efficient(Efficient),
    Doubling(Doubling),
}

impl Routine for Renamer {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        match self {
            Renamer::Compete(r) => match r.poll() {
                Poll::Op(op) => Poll::Op(op),
                Poll::Ready(won) => Poll::Ready(won.then_some(1)),
            },
            Renamer::Majority(r) => r.poll(),
            Renamer::Basic(r) => r.poll(),
            Renamer::Polylog(r) => r.poll(),
            Renamer::Ma(r) => r.poll(),
            Renamer::Snapshot(r) => r.poll(),
            Renamer::Efficient(r) => r.poll(),
            Renamer::Doubling(r) => r.poll(),
        }
    }

    fn resume(&mut self, response: Response) {
        match self {
            Renamer::Compete(r) => r.resume(response),
            Renamer::Majority(r) => r.resume(response),
            Renamer::Basic(r) => r.resume(response),
            Renamer::Polylog(r) => r.resume(response),
            Renamer::Ma(r) => r.resume(response),
            Renamer::Snapshot(r) => r.resume(response),
            Renamer::Efficient(r) => r.resume(response),
            Renamer::Doubling(r) => r.resume(response),
        }
    }
}

fn to_decision(out: Option<u64>) -> Decision {
    out.map_or(Decision::Unnamed, Decision::Name)
}

/// A stand-alone competition for one register, deciding `Win` or `Exit`.
pub fn compete_machine(me: u64, reg: RegisterId, hold: RegisterId) -> Box<dyn StepMachine> {
    fn decide(won: (bool, RegisterId)) -> Decision {
        if won.0 {
            Decision::Win { register: won.1 }
        } else {
            Decision::Exit
        }
    }
    Box::new(Oneshot::new(
        Tagged(Compete::new(Value::Pid(me), reg, hold), reg),
        decide,
    ))
}

/// Pairs a competition's result with its register.
#[derive(Clone, Debug)]
struct Tagged(Compete, RegisterId);

impl Routine for Tagged {
    type Output = (bool, RegisterId);

    fn poll(&mut self) -> Poll<Self::Output> {
        let won = crate::ready!(self.0.poll());
        Poll::Ready((won, self.1))
    }

    fn resume(&mut self, response: Response) {
        self.0.resume(response);
    }
}

/// A renaming algorithm instantiated for contention `k` and original names
/// in `[N]`, with `k` processes.
#[derive(Clone, Debug)]
pub struct RenamingSetup {
    pub algorithm: Algorithm,
    pub k: u64,
    pub n_names: u64,
    pub plan: Plan,
    pub registers: usize,
    pub snapshots: usize,
    pub blocks: Vec<Block>,
    /// The declared bound `M` for `k` participants.
    pub range_bound: u64,
}

impl RenamingSetup {
    pub fn new(algorithm: Algorithm, k: u64, n_names: u64, profile: &Profile) -> Result<Self, RenamingError> {
        if k == 0 {
            return Err(RenamingError::Config("k must be at least 1".into()));
        }
        if algorithm.uses_n() && n_names < k {
            return Err(RenamingError::Config(format!(
                "{algorithm} needs N >= k, got N={n_names}, k={k}"
            )));
        }
        let mut alloc = RegisterAllocator::new();
        let plan = match algorithm {
            Algorithm::Compete => Plan::Compete {
                reg: alloc.alloc("compete/R", 1),
                hold: alloc.alloc("compete/H", 1),
            },
            Algorithm::Majority => {
                let graph = profile.graph(n_names as usize, k as usize)?;
                let base = alloc.alloc("majority", 2 * graph.w_size());
                Plan::Majority(MajorityStage {
                    graph,
                    base,
                    name_offset: 0,
                })
            }
            Algorithm::Basic => Plan::Basic(Arc::new(BasicPlan::build(k, n_names, profile, &mut alloc, "basic")?)),
            Algorithm::Polylog => Plan::Polylog(Arc::new(PolylogPlan::build(
                k, n_names, profile, &mut alloc, "polylog",
            )?)),
            Algorithm::Ma => Plan::Ma(MaPlan {
                k,
                base: alloc.alloc("ma", 2 * MaPlan::cells(k) as usize),
            }),
            Algorithm::Snapshot => Plan::Snapshot(SnapshotPlan::for_contention(alloc.snapshot(), k)),
            Algorithm::Efficient => {
                Plan::Efficient(Arc::new(EfficientPlan::build(k, profile, &mut alloc, "efficient")?))
            }
            Algorithm::AlmostAdaptive => Plan::Doubling(Arc::new(DoublingPlan::almost_adaptive(
                n_names, k, profile, &mut alloc,
            )?)),
            Algorithm::Adaptive => Plan::Doubling(Arc::new(DoublingPlan::adaptive(k, profile, &mut alloc)?)),
        };
        let range_bound = match &plan {
            Plan::Doubling(p) => p.names_for_contention(k),
            other => other.names(),
        };
        Ok(Self {
            algorithm,
            k,
            n_names,
            plan,
            registers: alloc.registers(),
            snapshots: alloc.snapshots(),
            blocks: alloc.blocks().to_vec(),
            range_bound,
        })
    }

    pub fn memory(&self) -> SharedMemory {
        SharedMemory::with_snapshots(self.registers, self.k as usize, self.snapshots.max(1))
    }

    /// One machine per original name, in slot order.
    pub fn machines(&self, originals: &[u64]) -> Vec<Box<dyn StepMachine>> {
        originals
            .iter()
            .map(|&o| Box::new(Oneshot::new(self.plan.routine(Value::Pid(o), o), to_decision)) as Box<dyn StepMachine>)
            .collect()
    }

    pub fn simulation(&self, originals: &[u64]) -> Result<Simulation, RenamingError> {
        if originals.len() as u64 > self.k {
            return Err(RenamingError::Config(format!(
                "{} processes for a setup sized for {}",
                originals.len(),
                self.k
            )));
        }
        Ok(Simulation::new(self.memory(), self.machines(originals))?)
    }

    /// `k` distinct original names: a seeded sample from `[N]` when the
    /// algorithm reads them, else arbitrary distinct integers.
    pub fn originals(&self, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if self.algorithm.uses_n() {
            index::sample(&mut rng, self.n_names as usize, self.k as usize)
                .into_iter()
                .map(|i| i as u64 + 1)
                .collect()
        } else {
            let space = (self.k * 1000).max(self.n_names);
            index::sample(&mut rng, space as usize, self.k as usize)
                .into_iter()
                .map(|i| i as u64 + 1)
                .collect()
        }
    }

    pub fn run<S: Scheduler + ?Sized>(
        &self,
        originals: &[u64],
        scheduler: &mut S,
        limits: RunLimits,
    ) -> Result<(RenamingOutcome, ExecutionTrace), RenamingError> {
        let mut sim = self.simulation(originals)?;
        let end = sim.run(scheduler, limits)?;
        let trace = sim.into_trace();
        Ok((self.outcome(originals, &trace, end), trace))
    }

    pub fn outcome(&self, originals: &[u64], trace: &ExecutionTrace, end: RunEnd) -> RenamingOutcome {
        let crashed = trace.crashed();
        let mut assignments: Vec<Assignment> = originals
            .iter()
            .enumerate()
            .map(|(i, &o)| Assignment {
                slot: Slot::from_index(i),
                original: o,
                name: None,
                decided: false,
                crashed: crashed.contains(&Slot::from_index(i)),
            })
            .collect();
        for (slot, d) in trace.decisions() {
            let a = &mut assignments[slot.index()];
            a.decided = true;
            if let Decision::Name(x) = d {
                a.name = Some(*x);
            }
        }
        RenamingOutcome {
            algorithm: self.algorithm,
            k: self.k,
            n_names: self.n_names,
            max_name: assignments.iter().filter_map(|a| a.name).max(),
            steps: (0..originals.len()).map(|i| trace.steps(Slot::from_index(i))).collect(),
            assignments,
            registers_used: self.registers,
            range_bound: self.range_bound,
            end,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub slot: Slot,
    pub original: u64,
    pub name: Option<u64>,
    pub decided: bool,
    pub crashed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenamingOutcome {
    pub algorithm: Algorithm,
    pub k: u64,
    #[serde(rename = "N")]
    pub n_names: u64,
    pub assignments: Vec<Assignment>,
    pub steps: Vec<u64>,
    pub registers_used: usize,
    pub range_bound: u64,
    pub max_name: Option<u64>,
    pub end: RunEnd,
}

impl RenamingOutcome {
    pub fn max_steps(&self) -> u64 {
        self.steps.iter().copied().max().unwrap_or(0)
    }

    /// Pairs of slots that decided the same name.
    pub fn collisions(&self) -> Vec<(Slot, Slot)> {
        let mut out = Vec::new();
        for (i, a) in self.assignments.iter().enumerate() {
            for b in &self.assignments[i + 1..] {
                if a.name.is_some() && a.name == b.name {
                    out.push((a.slot, b.slot));
                }
            }
        }
        out
    }
}
