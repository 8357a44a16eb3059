//! Exhaustive enumeration of interleavings (and crashes) of a small system.

use super::machine::{Action, Op};
use super::memory::Slot;
use super::schedule::Directive;
use super::sim::Simulation;
use super::trace::ExecutionTrace;
use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Maximum events (activations) per process; a process that reaches the
    /// bound is truncated.
    pub step_bound: u64,
    /// Maximum number of crash directives along one execution.
    pub crash_budget: u32,
    /// Abort once more than this many traces have been produced.
    pub max_traces: u64,
}

impl ExploreConfig {
    pub fn new(step_bound: u64, crash_budget: u32) -> Self {
        Self {
            step_bound,
            crash_budget,
            max_traces: 50_000_000,
        }
    }

    pub fn with_cap(mut self, max_traces: u64) -> Self {
        self.max_traces = max_traces;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExploreStats {
    pub traces: u64,
    pub max_events: usize,
}

/// Visit every maximal execution reachable from `start`, in a fixed
/// depth-first order: activations by ascending slot, then crashes by
/// ascending slot. The visitor sees the final simulation state (trace and
/// memory).
pub fn explore<F>(start: &Simulation, cfg: &ExploreConfig, mut visit: F) -> Result<ExploreStats, SimError>
where
    F: FnMut(&Simulation),
{
    let mut stats = ExploreStats::default();
    dfs(start.clone(), cfg.crash_budget, cfg, &mut stats, &mut visit)?;
    Ok(stats)
}

fn dfs<F>(
    sim: Simulation,
    crashes_left: u32,
    cfg: &ExploreConfig,
    stats: &mut ExploreStats,
    visit: &mut F,
) -> Result<(), SimError>
where
    F: FnMut(&Simulation),
{
    let eligible: Vec<Slot> = sim
        .runnable()
        .iter()
        .copied()
        .filter(|&s| sim.activations(s) < cfg.step_bound)
        .collect();
    if eligible.is_empty() {
        stats.traces += 1;
        if stats.traces > cfg.max_traces {
            return Err(SimError::Explosion(cfg.max_traces));
        }
        stats.max_events = stats.max_events.max(sim.trace().len());
        visit(&sim);
        return Ok(());
    }
    let mut moves: Vec<(Directive, u32)> = eligible
        .iter()
        .map(|&s| (Directive::Activate(s), crashes_left))
        .collect();
    if crashes_left > 0 {
        moves.extend(eligible.iter().map(|&s| (Directive::Crash(s), crashes_left - 1)));
    }
    let last = moves.len() - 1;
    let mut sim = Some(sim);
    for (i, (d, budget)) in moves.into_iter().enumerate() {
        let mut child = if i == last {
            sim.take().expect("consumed only on the last move")
        } else {
            sim.as_ref().expect("present until the last move").clone()
        };
        child.apply(d)?;
        dfs(child, budget, cfg, stats, visit)?;
    }
    Ok(())
}

/// Shared object touched by a move, and whether the move writes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Footprint {
    Local,
    Register(usize, bool),
    Snapshot(usize, bool),
}

fn footprint(action: &Action) -> Footprint {
    match action {
        Action::Op(Op::Read(r)) => Footprint::Register(r.0, false),
        Action::Op(Op::Write(r, _)) => Footprint::Register(r.0, true),
        // updates by different processes write different segments
        Action::Op(Op::Update(s, _)) => Footprint::Snapshot(s.0, true),
        Action::Op(Op::Scan(s)) => Footprint::Snapshot(s.0, false),
        Action::Decide(_) | Action::Halt => Footprint::Local,
    }
}

#[derive(Clone, Copy, Debug)]
struct Move {
    directive: Directive,
    footprint: Footprint,
}

fn independent(a: &Move, b: &Move) -> bool {
    if a.directive.slot() == b.directive.slot() {
        return false;
    }
    match (a.directive, b.directive) {
        (Directive::Activate(_), Directive::Activate(_)) => match (a.footprint, b.footprint) {
            (Footprint::Register(x, wx), Footprint::Register(y, wy)) => x != y || !(wx || wy),
            (Footprint::Snapshot(x, ux), Footprint::Snapshot(y, uy)) => x != y || ux == uy,
            _ => true,
        },
        _ => true,
    }
}

/// Like [`explore`], but prunes interleavings that differ from an explored
/// one only by swapping adjacent independent moves (sleep sets). Every
/// final state reachable under the bounds is still visited at least once,
/// so properties of final states (decisions, memory) are covered; the
/// visited traces are a subset of all traces.
pub fn explore_reduced<F>(start: &Simulation, cfg: &ExploreConfig, mut visit: F) -> Result<ExploreStats, SimError>
where
    F: FnMut(&Simulation),
{
    let mut stats = ExploreStats::default();
    sleep_dfs(start.clone(), Vec::new(), cfg.crash_budget, cfg, &mut stats, &mut visit)?;
    Ok(stats)
}

fn sleep_dfs<F>(
    mut sim: Simulation,
    sleep: Vec<Move>,
    crashes_left: u32,
    cfg: &ExploreConfig,
    stats: &mut ExploreStats,
    visit: &mut F,
) -> Result<(), SimError>
where
    F: FnMut(&Simulation),
{
    let eligible: Vec<Slot> = sim
        .runnable()
        .iter()
        .copied()
        .filter(|&s| sim.activations(s) < cfg.step_bound)
        .collect();
    if eligible.is_empty() {
        stats.traces += 1;
        if stats.traces > cfg.max_traces {
            return Err(SimError::Explosion(cfg.max_traces));
        }
        stats.max_events = stats.max_events.max(sim.trace().len());
        visit(&sim);
        return Ok(());
    }
    let mut moves: Vec<Move> = eligible
        .iter()
        .map(|&s| Move {
            directive: Directive::Activate(s),
            footprint: footprint(&sim.next_action(s)),
        })
        .collect();
    if crashes_left > 0 {
        moves.extend(eligible.iter().map(|&s| Move {
            directive: Directive::Crash(s),
            footprint: Footprint::Local,
        }));
    }
    let mut asleep = sleep;
    let todo: Vec<Move> = moves
        .into_iter()
        .filter(|m| !asleep.iter().any(|s| s.directive == m.directive))
        .collect();
    for m in todo {
        let child_sleep: Vec<Move> = asleep.iter().copied().filter(|s| independent(s, &m)).collect();
        let mut child = sim.clone();
        child.apply(m.directive)?;
        let budget = match m.directive {
            Directive::Crash(_) => crashes_left - 1,
            Directive::Activate(_) => crashes_left,
        };
        sleep_dfs(child, child_sleep, budget, cfg, stats, visit)?;
        asleep.push(m);
    }
    Ok(())
}

/// Collect every trace. Prefer [`explore`] when only a property of each
/// trace is needed.
pub fn explore_all_interleavings(start: &Simulation, cfg: &ExploreConfig) -> Result<Vec<ExecutionTrace>, SimError> {
    let mut out = Vec::new();
    explore(start, cfg, |sim| out.push(sim.trace().clone()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::machine::{Op, ScriptedMachine, StepMachine};
    use crate::simcore::memory::{RegisterId, SharedMemory, Value};

    fn two_step_machine(reg: usize) -> Box<dyn StepMachine> {
        Box::new(ScriptedMachine::new(
            vec![Op::Write(RegisterId(reg), Value::Int(1)), Op::Read(RegisterId(reg))],
            None,
        ))
    }

    /// Number of ways to interleave sequences of the given lengths.
    fn lattice_paths(a: u64, b: u64) -> u64 {
        if a == 0 || b == 0 {
            1
        } else {
            lattice_paths(a - 1, b) + lattice_paths(a, b - 1)
        }
    }

    #[test]
    fn single_process_has_one_trace() {
        let sim = Simulation::new(SharedMemory::new(1, 1), vec![two_step_machine(0)]).unwrap();
        let traces = explore_all_interleavings(&sim, &ExploreConfig::new(3, 0)).unwrap();
        assert_eq!(traces.len(), 1);
    }

    #[test]
    fn two_two_step_processes_interleave_six_ways() {
        let sim = Simulation::new(SharedMemory::new(2, 2), vec![two_step_machine(0), two_step_machine(1)]).unwrap();
        let traces = explore_all_interleavings(&sim, &ExploreConfig::new(10, 0)).unwrap();
        assert_eq!(traces.len() as u64, lattice_paths(2, 2));
        assert_eq!(traces.len(), 6);
        let distinct: std::collections::HashSet<String> = traces.iter().map(|t| t.to_jsonl()).collect();
        assert_eq!(distinct.len(), 6);
    }

    #[test]
    fn cap_aborts_exploration() {
        let sim = Simulation::new(SharedMemory::new(2, 2), vec![two_step_machine(0), two_step_machine(1)]).unwrap();
        let err = explore_all_interleavings(&sim, &ExploreConfig::new(10, 0).with_cap(5)).unwrap_err();
        assert!(matches!(err, SimError::Explosion(5)));
    }

    #[test]
    fn reduction_keeps_every_final_state() {
        // two writers on one register and one on another
        let machines = || -> Vec<Box<dyn StepMachine>> {
            vec![
                Box::new(ScriptedMachine::new(
                    vec![Op::Write(RegisterId(0), Value::Int(1)), Op::Read(RegisterId(1))],
                    None,
                )),
                Box::new(ScriptedMachine::new(
                    vec![Op::Write(RegisterId(0), Value::Int(2))],
                    None,
                )),
                Box::new(ScriptedMachine::new(
                    vec![Op::Write(RegisterId(1), Value::Int(3))],
                    None,
                )),
            ]
        };
        let sim = Simulation::new(SharedMemory::new(2, 3), machines()).unwrap();
        let finals = |reduced: bool| {
            let mut out = std::collections::BTreeSet::new();
            let cfg = ExploreConfig::new(10, 1);
            let record = |s: &Simulation| {
                out.insert(format!("{:?} {:?}", s.memory().registers(), s.trace().crashed()));
            };
            let stats = if reduced {
                explore_reduced(&sim, &cfg, record)
            } else {
                explore(&sim, &cfg, record)
            }
            .unwrap();
            (out, stats.traces)
        };
        let (full, n_full) = finals(false);
        let (reduced, n_reduced) = finals(true);
        assert_eq!(full, reduced);
        assert!(n_reduced < n_full);
    }

    #[test]
    fn crash_budget_adds_truncated_executions() {
        let sim = Simulation::new(SharedMemory::new(1, 1), vec![two_step_machine(0)]).unwrap();
        // crash before step 1, before step 2, or never
        let traces = explore_all_interleavings(&sim, &ExploreConfig::new(10, 1)).unwrap();
        assert_eq!(traces.len(), 3);
    }
}
