//! The deterministic single-threaded simulator.

use serde::{Deserialize, Serialize};

use super::machine::{Action, Decision, Op, Poll, Response, Routine, StepMachine};
use super::memory::{SharedMemory, Slot};
use super::schedule::{Directive, Scheduler, SchedulerView};
use super::trace::{Event, EventKind, EventValue, ExecutionTrace};
use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted,
    Crashed,
}

/// Effect of one directive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Applied {
    Event,
    Skipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunLimits {
    pub max_events: u64,
    /// Stop once every runnable machine has been activated this many times
    /// in a row while idle, with no write or update in between.
    pub quiescence_window: Option<u64>,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            max_events: 10_000_000,
            quiescence_window: None,
        }
    }
}

impl RunLimits {
    pub fn events(max_events: u64) -> Self {
        Self {
            max_events,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunEnd {
    AllHalted,
    ScheduleExhausted,
    EventLimit,
    Quiescent,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    memory: SharedMemory,
    machines: Vec<Box<dyn StepMachine>>,
    status: Vec<Status>,
    ordinals: Vec<u64>,
    decisions: Vec<u64>,
    idle_streak: Vec<u64>,
    runnable: Vec<Slot>,
    trace: ExecutionTrace,
}

impl Simulation {
    /// Machine `i` runs in slot `i + 1`. The memory's snapshot objects must
    /// have a segment for every machine.
    pub fn new(memory: SharedMemory, machines: Vec<Box<dyn StepMachine>>) -> Result<Self, SimError> {
        let n = machines.len();
        if n > memory.processes() {
            return Err(SimError::Config(format!(
                "{n} machines but the snapshot objects only have {} segments",
                memory.processes()
            )));
        }
        let mut sim = Self {
            memory,
            machines,
            status: vec![Status::Running; n],
            ordinals: vec![0; n],
            decisions: vec![0; n],
            idle_streak: vec![0; n],
            runnable: Vec::with_capacity(n),
            trace: ExecutionTrace::new(n),
        };
        for i in 0..n {
            sim.refresh(i);
        }
        sim.rebuild_runnable();
        Ok(sim)
    }

    pub fn processes(&self) -> usize {
        self.machines.len()
    }

    pub fn memory(&self) -> &SharedMemory {
        &self.memory
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ExecutionTrace {
        self.trace
    }

    pub fn into_parts(self) -> (SharedMemory, ExecutionTrace) {
        (self.memory, self.trace)
    }

    pub fn status(&self, slot: Slot) -> Status {
        self.status[slot.index()]
    }

    pub fn machine(&self, slot: Slot) -> &dyn StepMachine {
        self.machines[slot.index()].as_ref()
    }

    /// Slots that can still take steps, ascending.
    pub fn runnable(&self) -> &[Slot] {
        &self.runnable
    }

    /// Events recorded for `slot` so far (its local ordinal).
    pub fn activations(&self, slot: Slot) -> u64 {
        self.ordinals[slot.index()]
    }

    /// What the machine in `slot` will do when next activated.
    pub fn next_action(&mut self, slot: Slot) -> Action {
        self.machines[slot.index()].action()
    }

    pub fn all_done(&self) -> bool {
        self.runnable.is_empty()
    }

    fn refresh(&mut self, i: usize) {
        if self.status[i] == Status::Running && self.machines[i].action() == Action::Halt {
            self.status[i] = Status::Halted;
        }
    }

    fn rebuild_runnable(&mut self) {
        self.runnable.clear();
        self.runnable.extend(
            self.status
                .iter()
                .enumerate()
                .filter(|(_, s)| **s == Status::Running)
                .map(|(i, _)| Slot::from_index(i)),
        );
    }

    fn record(&mut self, slot: Slot, kind: EventKind, reg: Option<u64>, val: EventValue) {
        let i = slot.index();
        self.ordinals[i] += 1;
        if kind.is_step() {
            self.trace.step_counts[i] += 1;
        }
        if kind == EventKind::Scan {
            self.trace.scan_counts[i] += 1;
        }
        let seq = self.trace.events.len() as u64;
        self.trace.events.push(Event {
            seq,
            slot,
            kind,
            reg,
            val,
            step: self.ordinals[i],
        });
    }

    /// Execute one directive.
    pub fn apply(&mut self, directive: Directive) -> Result<Applied, SimError> {
        let slot = directive.slot();
        if slot.0 == 0 || slot.index() >= self.machines.len() {
            return Err(SimError::UnknownSlot(slot));
        }
        let i = slot.index();
        if self.status[i] != Status::Running {
            self.trace.skipped += 1;
            return Ok(Applied::Skipped);
        }
        match directive {
            Directive::Crash(_) => {
                self.status[i] = Status::Crashed;
                self.record(slot, EventKind::Crash, None, EventValue::None);
            }
            Directive::Activate(_) => {
                let idle = self.machines[i].is_idle();
                let action = self.machines[i].action();
                let mut wrote = false;
                match action {
                    Action::Halt => unreachable!("halted machines are never runnable"),
                    Action::Decide(d) => {
                        let reg = decision_register(&d);
                        self.decisions[i] += 1;
                        self.record(slot, EventKind::Decide, reg, EventValue::Decision(d));
                        self.machines[i].complete(Response::Ack);
                    }
                    Action::Op(op) => {
                        let (kind, reg, val, resp) = match op {
                            Op::Read(r) => {
                                let v = self.memory.read(r)?;
                                (EventKind::Read, r.0 as u64, EventValue::Value(v), Response::Value(v))
                            }
                            Op::Write(r, v) => {
                                self.memory.write(r, v)?;
                                wrote = true;
                                (EventKind::Write, r.0 as u64, EventValue::Value(v), Response::Ack)
                            }
                            Op::Update(s, v) => {
                                self.memory.update(s, slot, v)?;
                                wrote = true;
                                (EventKind::Update, s.0 as u64, EventValue::Value(v), Response::Ack)
                            }
                            Op::Scan(s) => {
                                let view = self.memory.scan(s)?;
                                (
                                    EventKind::Scan,
                                    s.0 as u64,
                                    EventValue::View(view.clone()),
                                    Response::View(view),
                                )
                            }
                        };
                        self.record(slot, kind, Some(reg), val);
                        self.machines[i].complete(resp);
                    }
                }
                if wrote {
                    self.idle_streak.iter_mut().for_each(|s| *s = 0);
                } else if idle {
                    self.idle_streak[i] += 1;
                } else {
                    self.idle_streak[i] = 0;
                }
                self.refresh(i);
            }
        }
        if self.status[i] != Status::Running {
            self.rebuild_runnable();
        }
        Ok(Applied::Event)
    }

    /// Drive the simulation until every machine halted or crashed, the
    /// scheduler runs dry, or a limit is hit.
    pub fn run<S: Scheduler + ?Sized>(&mut self, scheduler: &mut S, limits: RunLimits) -> Result<RunEnd, SimError> {
        loop {
            if self.all_done() {
                return Ok(RunEnd::AllHalted);
            }
            if self.trace.events.len() as u64 >= limits.max_events {
                return Ok(RunEnd::EventLimit);
            }
            if let Some(w) = limits.quiescence_window {
                if self.runnable.iter().all(|s| self.idle_streak[s.index()] >= w) {
                    return Ok(RunEnd::Quiescent);
                }
            }
            let view = SchedulerView {
                runnable: &self.runnable,
                decisions: &self.decisions,
                events: self.trace.events.len() as u64,
                processes: self.machines.len(),
            };
            let Some(d) = scheduler.next(&view) else {
                return Ok(RunEnd::ScheduleExhausted);
            };
            self.apply(d)?;
        }
    }
}

fn decision_register(d: &Decision) -> Option<u64> {
    match d {
        Decision::Win { register } => Some(register.0 as u64),
        Decision::Ack { register, .. } | Decision::Stored { register, .. } => Some(register.0 as u64),
        _ => None,
    }
}

/// Run `machines` over `memory` under `scheduler` and return the trace.
pub fn run<S: Scheduler + ?Sized>(
    machines: Vec<Box<dyn StepMachine>>,
    scheduler: &mut S,
    memory: SharedMemory,
) -> Result<ExecutionTrace, SimError> {
    let mut sim = Simulation::new(memory, machines)?;
    sim.run(scheduler, RunLimits::default())?;
    Ok(sim.into_trace())
}

/// Run a routine alone against `memory` as `slot`, without recording a
/// trace. Returns the output and the number of shared-memory steps.
pub fn drive<R: Routine>(routine: &mut R, memory: &mut SharedMemory, slot: Slot) -> Result<(R::Output, u64), SimError> {
    let mut steps = 0;
    loop {
        let op = match routine.poll() {
            Poll::Ready(out) => return Ok((out, steps)),
            Poll::Op(op) => op,
        };
        steps += 1;
        let response = match op {
            Op::Read(r) => Response::Value(memory.read(r)?),
            Op::Write(r, v) => {
                memory.write(r, v)?;
                Response::Ack
            }
            Op::Update(s, v) => {
                memory.update(s, slot, v)?;
                Response::Ack
            }
            Op::Scan(s) => Response::View(memory.scan(s)?),
        };
        routine.resume(response);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::machine::ScriptedMachine;
    use crate::simcore::memory::{RegisterId, SnapshotId, Value};
    use crate::simcore::schedule::{RoundRobin, Scripted};

    fn writer(reg: usize, v: u64) -> Box<dyn StepMachine> {
        Box::new(ScriptedMachine::new(
            vec![Op::Write(RegisterId(reg), Value::Int(v))],
            Some(Decision::Name(v)),
        ))
    }

    #[test]
    fn single_writer_then_decide_gives_two_events() {
        let trace = run(vec![writer(0, 7)], &mut RoundRobin::default(), SharedMemory::new(1, 1)).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.events[0].kind, EventKind::Write);
        assert_eq!(trace.events[1].kind, EventKind::Decide);
        assert_eq!(trace.step_counts, vec![1]);
        assert_eq!(trace.events[1].step, 2);
    }

    #[test]
    fn crashed_process_takes_no_further_steps() {
        let mut sim = Simulation::new(SharedMemory::new(1, 2), vec![writer(0, 1), writer(0, 2)]).unwrap();
        assert_eq!(sim.apply(Directive::Crash(Slot(1))).unwrap(), Applied::Event);
        assert_eq!(sim.apply(Directive::Activate(Slot(1))).unwrap(), Applied::Skipped);
        let trace = sim.into_trace();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.events[0].kind, EventKind::Crash);
        assert_eq!(trace.skipped, 1);
        assert_eq!(trace.step_counts, vec![0, 0]);
    }

    #[test]
    fn last_writer_wins() {
        let mut sim = Simulation::new(SharedMemory::new(1, 2), vec![writer(0, 1), writer(0, 2)]).unwrap();
        let mut s = Scripted::new(vec![Directive::Activate(Slot(1)), Directive::Activate(Slot(2))]);
        assert_eq!(
            sim.run(&mut s, RunLimits::default()).unwrap(),
            RunEnd::ScheduleExhausted
        );
        assert_eq!(sim.memory().read(RegisterId(0)).unwrap(), Value::Int(2));
    }

    #[test]
    fn unknown_slot_is_a_config_error() {
        let mut sim = Simulation::new(SharedMemory::new(1, 1), vec![writer(0, 1)]).unwrap();
        assert!(matches!(
            sim.apply(Directive::Activate(Slot(2))),
            Err(SimError::UnknownSlot(Slot(2)))
        ));
    }

    #[test]
    fn scan_returns_the_cut_at_the_scan_event() {
        let m1 = ScriptedMachine::new(vec![Op::Update(SnapshotId(0), Value::Int(5))], None);
        let m2 = ScriptedMachine::new(vec![Op::Scan(SnapshotId(0)), Op::Scan(SnapshotId(0))], None);
        let mut sim = Simulation::new(SharedMemory::new(0, 2), vec![Box::new(m1), Box::new(m2)]).unwrap();
        for d in [
            Directive::Activate(Slot(2)),
            Directive::Activate(Slot(1)),
            Directive::Activate(Slot(2)),
        ] {
            sim.apply(d).unwrap();
        }
        let trace = sim.trace();
        assert_eq!(trace.events[0].val, EventValue::View(vec![Value::Null, Value::Null]));
        assert_eq!(trace.events[2].val, EventValue::View(vec![Value::Int(5), Value::Null]));
        assert_eq!(trace.scan_counts, vec![0, 2]);
    }
}
