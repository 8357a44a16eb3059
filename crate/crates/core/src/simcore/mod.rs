//! Deterministic simulation substrate: registers, snapshot objects, step
//! machines, schedulers, crash injection and traces.

mod explore;
mod machine;
mod memory;
mod schedule;
mod sim;
mod trace;

pub use explore::{explore, explore_all_interleavings, explore_reduced, ExploreConfig, ExploreStats};
pub use machine::{Action, Decision, MachineClone, Oneshot, Op, Poll, Response, Routine, ScriptedMachine, StepMachine};
pub use memory::{ProcessId, RegisterId, SharedMemory, Slot, SnapshotId, Value};
pub use schedule::{
    format_directives, parse_crash_plan, parse_directives, Directive, RoundRobin, ScheduleKind, Scheduler,
    SchedulerView, Scripted, SeededRandom, WithCrashes,
};
pub use sim::{drive, run, Applied, RunEnd, RunLimits, Simulation, Status};
pub use trace::{Event, EventKind, EventValue, ExecutionTrace};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("register {0} is outside the memory")]
    BadRegister(RegisterId),
    #[error("no snapshot object {0:?}")]
    BadSnapshot(SnapshotId),
    #[error("directive names unknown slot {0}")]
    UnknownSlot(Slot),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("exploration exceeded {0} traces")]
    Explosion(u64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed trace: {0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub(crate) fn from_json(e: serde_json::Error) -> Self {
        SimError::Json(e.to_string())
    }
}
