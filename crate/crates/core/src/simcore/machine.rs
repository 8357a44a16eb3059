//! Step machines: resumable per-process programs driven by the simulator.
//!
//! Every activation of a process performs exactly one shared-memory
//! operation (or records one decision). Algorithms are written as
//! [`Routine`]s, which compose: a routine can embed sub-routines and forward
//! their operations until they finish. A [`Oneshot`] wraps a routine into a
//! [`StepMachine`] that decides once and halts.

use serde::{Deserialize, Serialize};
use std::fmt::Debug;

use super::memory::{RegisterId, SnapshotId, Value};

/// One atomic shared-memory operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Read(RegisterId),
    Write(RegisterId, Value),
    /// Write the caller's own segment of a snapshot object.
    Update(SnapshotId, Value),
    Scan(SnapshotId),
}

/// What the simulator hands back after executing an [`Op`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Response {
    Ack,
    Value(Value),
    View(Vec<Value>),
}

impl Response {
    /// The value returned by a read. Panics on any other response, which
    /// would mean the simulator and the machine disagree on the pending op.
    pub fn value(&self) -> Value {
        match self {
            Response::Value(v) => *v,
            other => panic!("expected a read response, got {other:?}"),
        }
    }

    pub fn into_view(self) -> Vec<Value> {
        match self {
            Response::View(v) => v,
            other => panic!("expected a scan response, got {other:?}"),
        }
    }
}

/// Externally visible outcome recorded as a `decide` event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// Won the competition for `register`.
    Win { register: RegisterId },
    /// Lost a competition.
    Exit,
    /// Acquired a new name.
    Name(u64),
    /// Finished a renaming routine without a name.
    Unnamed,
    /// Deposited `value` into dedicated register `register`.
    Ack { register: RegisterId, value: u64 },
    /// Committed to an integer as its next name.
    Commit(u64),
    /// A store completed into `register`.
    Stored { register: RegisterId, value: u64 },
    /// A collect completed; `(original name, value)` pairs, sorted.
    Collected(Vec<(u64, u64)>),
    /// The machine detected a protocol misuse.
    Violation(String),
}

/// What a machine wants to do on its next activation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Op(Op),
    Decide(Decision),
    Halt,
}

/// A per-process program. `action` must return the same thing until
/// `complete` is called; after a `Decide` action, `complete` receives
/// [`Response::Ack`].
pub trait StepMachine: MachineClone + Debug + Send {
    fn action(&mut self) -> Action;
    fn complete(&mut self, response: Response);

    /// True when the machine has no outstanding work and would only re-read
    /// shared state. Used for quiescence detection on long-lived machines.
    fn is_idle(&self) -> bool {
        false
    }
}

pub trait MachineClone {
    fn clone_box(&self) -> Box<dyn StepMachine>;
}

impl<T: StepMachine + Clone + 'static> MachineClone for T {
    fn clone_box(&self) -> Box<dyn StepMachine> {
        Box::new(self.clone())
    }
}

impl Clone for Box<dyn StepMachine> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Result of polling a routine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Poll<T> {
    Op(Op),
    Ready(T),
}

/// A composable sub-program yielding one output.
///
/// `poll` advances through local computation until the routine needs a
/// shared-memory operation or is finished. It is idempotent until `resume`
/// delivers the response to the returned op.
pub trait Routine: Clone + Debug + Send + 'static {
    type Output: Clone;

    fn poll(&mut self) -> Poll<Self::Output>;
    fn resume(&mut self, response: Response);
}

/// Forward a sub-routine's pending op out of the enclosing `poll`, or bind
/// its output.
#[macro_export]
macro_rules! ready {
    ($e:expr) => {
        match $e {
            $crate::simcore::Poll::Op(op) => return $crate::simcore::Poll::Op(op),
            $crate::simcore::Poll::Ready(out) => out,
        }
    };
}

/// Runs a routine once, records its output as a decision, then halts.
#[derive(Clone, Debug)]
pub struct Oneshot<R: Routine> {
    routine: R,
    to_decision: fn(R::Output) -> Decision,
    decided: bool,
}

impl<R: Routine> Oneshot<R> {
    pub fn new(routine: R, to_decision: fn(R::Output) -> Decision) -> Self {
        Self {
            routine,
            to_decision,
            decided: false,
        }
    }

    pub fn routine(&self) -> &R {
        &self.routine
    }
}

impl<R: Routine> StepMachine for Oneshot<R>
where
    R::Output: Debug + Send,
{
    fn action(&mut self) -> Action {
        if self.decided {
            return Action::Halt;
        }
        match self.routine.poll() {
            Poll::Op(op) => Action::Op(op),
            Poll::Ready(out) => Action::Decide((self.to_decision)(out)),
        }
    }

    fn complete(&mut self, response: Response) {
        match self.routine.poll() {
            Poll::Op(_) => self.routine.resume(response),
            Poll::Ready(_) => self.decided = true,
        }
    }
}

/// A machine that performs a fixed list of operations, then decides.
/// Mostly useful in tests of the simulator itself.
#[derive(Clone, Debug)]
pub struct ScriptedMachine {
    ops: Vec<Op>,
    pos: usize,
    decision: Option<Decision>,
    responses: Vec<Response>,
}

impl ScriptedMachine {
    pub fn new(ops: Vec<Op>, decision: Option<Decision>) -> Self {
        Self {
            ops,
            pos: 0,
            decision,
            responses: Vec::new(),
        }
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }
}

impl StepMachine for ScriptedMachine {
    fn action(&mut self) -> Action {
        if let Some(op) = self.ops.get(self.pos) {
            return Action::Op(op.clone());
        }
        match &self.decision {
            Some(d) if self.pos == self.ops.len() => Action::Decide(d.clone()),
            _ => Action::Halt,
        }
    }

    fn complete(&mut self, response: Response) {
        if self.pos < self.ops.len() {
            self.responses.push(response);
        }
        self.pos += 1;
    }
}
