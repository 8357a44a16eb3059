//! Store&collect over a renaming backend.
//!
//! A process's first store acquires a name from the backend, raises the
//! control flags of every interval up to the one holding its register, and
//! writes `(process, value)` there; later stores are a single write.
//! Collect reads intervals in order until it meets a zero control flag.
//! Processes are identified by their slot number.

mod layout;

pub use layout::CollectLayout;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

use crate::renaming::{Algorithm, Plan, Profile, Renamer, RenamingError, RenamingSetup};
use crate::simcore::{
    Action, Decision, Directive, EventKind, ExecutionTrace, Op, Poll, RegisterId, Response, Routine, RunEnd, RunLimits,
    Scheduler, SchedulerView, SharedMemory, SimError, Simulation, Slot, StepMachine, Value,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Request {
    Store(u64),
    Collect,
}

/// One line of an op script: `S p v` or `C p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptOp {
    pub process: u32,
    pub request: Request,
}

/// Parse an op script. Requests are separated by newlines or `;`, and `#`
/// starts a comment.
pub fn parse_ops(text: &str) -> Result<Vec<ScriptOp>, SimError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for part in line.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let bad = || SimError::Parse {
                line: lineno + 1,
                message: format!("expected `S <p> <v>` or `C <p>`, got `{part}`"),
            };
            let fields: Vec<&str> = part.split_whitespace().collect();
            let process: u32 = fields
                .get(1)
                .and_then(|s| s.parse().ok())
                .filter(|&p| p > 0)
                .ok_or_else(bad)?;
            let request = match (fields[0], fields.len()) {
                ("S", 3) => Request::Store(fields[2].parse().map_err(|_| bad())?),
                ("C", 2) => Request::Collect,
                _ => return Err(bad()),
            };
            out.push(ScriptOp { process, request });
        }
    }
    Ok(out)
}

pub fn format_ops(ops: &[ScriptOp]) -> String {
    ops.iter()
        .map(|op| match op.request {
            Request::Store(v) => format!("S {} {v}\n", op.process),
            Request::Collect => format!("C {}\n", op.process),
        })
        .collect()
}

#[derive(Clone, Debug)]
enum StorePhase {
    Naming(Box<Renamer>),
    /// Raising flags `j..=last`; `checked` once flag `j` was read as zero.
    Flags {
        reg: RegisterId,
        j: u32,
        last: u32,
        checked: bool,
    },
    Write(RegisterId),
    Done(Result<RegisterId, String>),
}

/// One store. Outputs the register written, or why there is none.
#[derive(Clone, Debug)]
pub struct StoreOp {
    pid: u64,
    value: u64,
    layout: CollectLayout,
    phase: StorePhase,
}

impl StoreOp {
    pub fn first(plan: &Plan, layout: CollectLayout, pid: u64, value: u64) -> Self {
        let renamer = plan.routine(Value::Pid(pid), pid);
        Self {
            pid,
            value,
            layout,
            phase: StorePhase::Naming(Box::new(renamer)),
        }
    }

    pub fn again(layout: CollectLayout, pid: u64, value: u64, reg: RegisterId) -> Self {
        Self {
            pid,
            value,
            layout,
            phase: StorePhase::Write(reg),
        }
    }
}

impl Routine for StoreOp {
    type Output = Result<RegisterId, String>;

    fn poll(&mut self) -> Poll<Self::Output> {
        loop {
            match &mut self.phase {
                StorePhase::Naming(r) => {
                    let name = crate::ready!(r.poll());
                    self.phase = match name {
                        None => StorePhase::Done(Err("renaming backend returned no name".into())),
                        Some(x) if x > self.layout.capacity() => {
                            StorePhase::Done(Err(format!("name {x} beyond layout capacity")))
                        }
                        Some(x) => StorePhase::Flags {
                            reg: self.layout.register_of(x),
                            j: 0,
                            last: CollectLayout::interval_of(x),
                            checked: false,
                        },
                    };
                }
                StorePhase::Flags { j, checked: false, .. } => {
                    return Poll::Op(Op::Read(self.layout.control(*j)));
                }
                StorePhase::Flags { j, checked: true, .. } => {
                    return Poll::Op(Op::Write(self.layout.control(*j), Value::Int(1)));
                }
                StorePhase::Write(reg) => return Poll::Op(Op::Write(*reg, Value::Pair(self.pid, self.value))),
                StorePhase::Done(out) => return Poll::Ready(out.clone()),
            }
        }
    }

    fn resume(&mut self, response: Response) {
        self.phase = match std::mem::replace(&mut self.phase, StorePhase::Done(Err(String::new()))) {
            StorePhase::Naming(mut r) => {
                r.resume(response);
                StorePhase::Naming(r)
            }
            StorePhase::Flags { reg, j, last, checked } => {
                let set = checked || !response.value().is_null();
                if !checked && !set {
                    StorePhase::Flags {
                        reg,
                        j,
                        last,
                        checked: true,
                    }
                } else if j == last {
                    StorePhase::Write(reg)
                } else {
                    StorePhase::Flags {
                        reg,
                        j: j + 1,
                        last,
                        checked: false,
                    }
                }
            }
            StorePhase::Write(reg) => StorePhase::Done(Ok(reg)),
            StorePhase::Done(_) => unreachable!("resumed a finished store"),
        };
    }
}

/// One collect: flag of interval `i`, then its registers, until a zero flag
/// or the end of the layout.
#[derive(Clone, Debug)]
pub struct CollectOp {
    layout: CollectLayout,
    interval: u32,
    /// `None` while reading the flag.
    pos: Option<u64>,
    found: BTreeMap<u64, u64>,
    done: bool,
}

impl CollectOp {
    pub fn new(layout: CollectLayout) -> Self {
        Self {
            layout,
            interval: 0,
            pos: None,
            found: BTreeMap::new(),
            done: false,
        }
    }
}

impl Routine for CollectOp {
    type Output = Vec<(u64, u64)>;

    fn poll(&mut self) -> Poll<Self::Output> {
        if self.done {
            return Poll::Ready(self.found.iter().map(|(&p, &v)| (p, v)).collect());
        }
        Poll::Op(Op::Read(match self.pos {
            None => self.layout.control(self.interval),
            Some(pos) => self.layout.slot(self.interval, pos),
        }))
    }

    fn resume(&mut self, response: Response) {
        let v = response.value();
        match self.pos {
            None if v.is_null() => self.done = true,
            None => self.pos = Some(0),
            Some(pos) => {
                if let Some((p, x)) = v.as_pair() {
                    self.found.insert(p, x);
                }
                if pos + 1 < CollectLayout::interval_len(self.interval) {
                    self.pos = Some(pos + 1);
                } else {
                    self.interval += 1;
                    self.pos = None;
                    self.done = self.interval == self.layout.intervals;
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Current {
    Store(StoreOp),
    Collect(CollectOp),
}

/// A process serving its queue of store and collect requests one at a time.
#[derive(Clone, Debug)]
pub struct Worker {
    pid: u64,
    plan: Plan,
    layout: CollectLayout,
    queue: VecDeque<Request>,
    register: Option<RegisterId>,
    current: Option<Current>,
}

impl Worker {
    pub fn new(pid: u64, plan: Plan, layout: CollectLayout, requests: impl IntoIterator<Item = Request>) -> Self {
        Self {
            pid,
            plan,
            layout,
            queue: requests.into_iter().collect(),
            register: None,
            current: None,
        }
    }

    fn start(&mut self) -> bool {
        if self.current.is_none() {
            self.current = self.queue.pop_front().map(|req| match req {
                Request::Store(v) => Current::Store(match self.register {
                    Some(reg) => StoreOp::again(self.layout, self.pid, v, reg),
                    None => StoreOp::first(&self.plan, self.layout, self.pid, v),
                }),
                Request::Collect => Current::Collect(CollectOp::new(self.layout)),
            });
        }
        self.current.is_some()
    }

    fn poll(&mut self) -> Poll<Decision> {
        match self.current.as_mut().expect("started") {
            Current::Store(op) => {
                let value = op.value;
                match crate::ready!(op.poll()) {
                    Ok(register) => Poll::Ready(Decision::Stored { register, value }),
                    Err(msg) => Poll::Ready(Decision::Violation(msg)),
                }
            }
            Current::Collect(op) => Poll::Ready(Decision::Collected(crate::ready!(op.poll()))),
        }
    }
}

impl StepMachine for Worker {
    fn action(&mut self) -> Action {
        if !self.start() {
            return Action::Halt;
        }
        match self.poll() {
            Poll::Op(op) => Action::Op(op),
            Poll::Ready(d) => Action::Decide(d),
        }
    }

    fn complete(&mut self, response: Response) {
        match self.poll() {
            Poll::Op(_) => match self.current.as_mut().expect("started") {
                Current::Store(op) => op.resume(response),
                Current::Collect(op) => op.resume(response),
            },
            Poll::Ready(d) => {
                if let Decision::Stored { register, .. } = d {
                    self.register = Some(register);
                }
                self.current = None;
            }
        }
    }
}

/// Runs the requests of a script one at a time, in script order: activates
/// the owner of the current request until that request's decision appears.
/// Requests of crashed processes are skipped.
#[derive(Clone, Debug)]
pub struct ScriptOrder {
    owners: Vec<Slot>,
    /// Decisions the owner must have made once request `i` completes.
    targets: Vec<u64>,
    pos: usize,
}

impl ScriptOrder {
    pub fn new(ops: &[ScriptOp]) -> Self {
        let mut seen: BTreeMap<u32, u64> = BTreeMap::new();
        let mut owners = Vec::with_capacity(ops.len());
        let mut targets = Vec::with_capacity(ops.len());
        for op in ops {
            let c = seen.entry(op.process).or_default();
            *c += 1;
            owners.push(Slot(op.process));
            targets.push(*c);
        }
        Self {
            owners,
            targets,
            pos: 0,
        }
    }
}

impl Scheduler for ScriptOrder {
    fn next(&mut self, view: &SchedulerView<'_>) -> Option<Directive> {
        while let Some(&owner) = self.owners.get(self.pos) {
            let done = view.decisions[owner.index()] >= self.targets[self.pos];
            if done || !view.runnable.contains(&owner) {
                self.pos += 1;
                continue;
            }
            return Some(Directive::Activate(owner));
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Store,
    Collect,
}

/// A request as it played out in a trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    /// Position in the script.
    pub request: usize,
    pub process: u32,
    pub kind: OpKind,
    pub value: Option<u64>,
    pub register: Option<usize>,
    pub result: Option<Vec<(u64, u64)>>,
    /// Shared-memory steps the operation took.
    pub steps: u64,
    /// Sequence number of the operation's first event.
    pub first_event: Option<u64>,
    /// Sequence number of its decision, if it completed.
    pub decided_at: Option<u64>,
}

/// Split a trace into per-request records. The `j`-th decision of a slot
/// closes that slot's `j`-th request.
pub fn op_records(ops: &[ScriptOp], trace: &ExecutionTrace) -> Vec<OpRecord> {
    let mut per_slot: BTreeMap<u32, VecDeque<usize>> = BTreeMap::new();
    let mut records: Vec<OpRecord> = ops
        .iter()
        .enumerate()
        .map(|(i, op)| {
            per_slot.entry(op.process).or_default().push_back(i);
            OpRecord {
                request: i,
                process: op.process,
                kind: match op.request {
                    Request::Store(_) => OpKind::Store,
                    Request::Collect => OpKind::Collect,
                },
                value: match op.request {
                    Request::Store(v) => Some(v),
                    Request::Collect => None,
                },
                register: None,
                result: None,
                steps: 0,
                first_event: None,
                decided_at: None,
            }
        })
        .collect();
    for e in &trace.events {
        if e.kind == EventKind::Crash {
            continue;
        }
        let Some(&i) = per_slot.get(&e.slot.0).and_then(|q| q.front()) else {
            continue;
        };
        let r = &mut records[i];
        r.first_event.get_or_insert(e.seq);
        if e.kind.is_step() {
            r.steps += 1;
        }
        if let Some(d) = e.decision() {
            r.decided_at = Some(e.seq);
            match d {
                Decision::Stored { register, .. } => r.register = Some(register.0),
                Decision::Collected(found) => r.result = Some(found.clone()),
                _ => {}
            }
            per_slot.get_mut(&e.slot.0).expect("present").pop_front();
        }
    }
    records
}

/// Store&collect instantiated on a renaming backend for up to `k` processes.
#[derive(Clone, Debug)]
pub struct StoreCollect {
    pub backend: RenamingSetup,
    pub layout: CollectLayout,
}

impl StoreCollect {
    /// `Polylog` needs `k` and `N`, `AlmostAdaptive` only `N`, `Adaptive`
    /// neither; processes use their slot number as original name, so
    /// `N >= k` is required by the first two.
    pub fn new(backend: Algorithm, k: u64, n_names: u64, profile: &Profile) -> Result<Self, RenamingError> {
        if !matches!(
            backend,
            Algorithm::Polylog | Algorithm::AlmostAdaptive | Algorithm::Adaptive
        ) {
            return Err(RenamingError::Config(format!(
                "store&collect backend must be polylog, almost-adaptive or adaptive, got {backend}"
            )));
        }
        let backend = RenamingSetup::new(backend, k, n_names, profile)?;
        let layout = CollectLayout::for_names(RegisterId(backend.registers), backend.plan.names());
        Ok(Self { backend, layout })
    }

    pub fn memory(&self) -> SharedMemory {
        SharedMemory::with_snapshots(
            self.backend.registers + self.layout.len(),
            self.backend.k as usize,
            self.backend.snapshots.max(1),
        )
    }

    pub fn simulation(&self, ops: &[ScriptOp]) -> Result<Simulation, RenamingError> {
        let k = self.backend.k as u32;
        if let Some(op) = ops.iter().find(|op| op.process == 0 || op.process > k) {
            return Err(RenamingError::Config(format!("process {} outside 1..={k}", op.process)));
        }
        let machines = (1..=k)
            .map(|p| {
                let reqs = ops.iter().filter(|op| op.process == p).map(|op| op.request);
                Box::new(Worker::new(p as u64, self.backend.plan.clone(), self.layout, reqs)) as Box<dyn StepMachine>
            })
            .collect();
        Ok(Simulation::new(self.memory(), machines)?)
    }

    /// Run the script under `scheduler`; [`ScriptOrder`] gives the
    /// sequential semantics.
    pub fn run<S: Scheduler + ?Sized>(
        &self,
        ops: &[ScriptOp],
        scheduler: &mut S,
        limits: RunLimits,
    ) -> Result<StoreCollectRun, RenamingError> {
        let mut sim = self.simulation(ops)?;
        let end = sim.run(scheduler, limits)?;
        let trace = sim.into_trace();
        Ok(StoreCollectRun {
            records: op_records(ops, &trace),
            trace,
            end,
        })
    }

    pub fn run_sequential(&self, ops: &[ScriptOp]) -> Result<StoreCollectRun, RenamingError> {
        self.run(ops, &mut ScriptOrder::new(ops), RunLimits::default())
    }
}

#[derive(Clone, Debug)]
pub struct StoreCollectRun {
    pub records: Vec<OpRecord>,
    pub trace: ExecutionTrace,
    pub end: RunEnd,
}
