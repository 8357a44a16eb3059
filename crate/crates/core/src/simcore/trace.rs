//! Execution traces and their JSON-lines export.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::machine::Decision;
use super::memory::{Slot, Value};
use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Read,
    Write,
    Update,
    Scan,
    Decide,
    Crash,
}

impl EventKind {
    /// Whether the event is a shared-memory operation (a local step).
    pub fn is_step(self) -> bool {
        matches!(
            self,
            EventKind::Read | EventKind::Write | EventKind::Update | EventKind::Scan
        )
    }
}

/// Payload of an event: the value read or written, the cut returned by a
/// scan, or the decision taken.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventValue {
    None,
    Value(Value),
    View(Vec<Value>),
    Decision(Decision),
}

/// One line of a trace. `reg` is the register index for reads and writes,
/// the snapshot object index for updates and scans, and the register named
/// by a decision where there is one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub slot: Slot,
    pub kind: EventKind,
    pub reg: Option<u64>,
    pub val: EventValue,
    /// Per-process event ordinal, starting at 1.
    pub step: u64,
}

impl Event {
    pub fn decision(&self) -> Option<&Decision> {
        match &self.val {
            EventValue::Decision(d) => Some(d),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<Value> {
        match &self.val {
            EventValue::Value(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<Event>,
    /// Shared-memory operations per slot (index 0 is slot 1).
    pub step_counts: Vec<u64>,
    /// Scans per slot, also included in `step_counts`.
    pub scan_counts: Vec<u64>,
    /// Directives that had no effect (crashed, halted or step-bounded target).
    pub skipped: u64,
}

impl ExecutionTrace {
    pub fn new(n: usize) -> Self {
        Self {
            events: Vec::new(),
            step_counts: vec![0; n],
            scan_counts: vec![0; n],
            skipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn processes(&self) -> usize {
        self.step_counts.len()
    }

    pub fn steps(&self, slot: Slot) -> u64 {
        self.step_counts[slot.index()]
    }

    pub fn max_steps(&self) -> u64 {
        self.step_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn decisions(&self) -> impl Iterator<Item = (Slot, &Decision)> + '_ {
        self.events.iter().filter_map(|e| e.decision().map(|d| (e.slot, d)))
    }

    pub fn crashed(&self) -> Vec<Slot> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Crash)
            .map(|e| e.slot)
            .collect()
    }

    /// Events of one slot, in order.
    pub fn events_of(&self, slot: Slot) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.slot == slot)
    }

    /// Rebuild per-slot counters from the events (used after import).
    pub fn recount(&mut self, n: usize) {
        self.step_counts = vec![0; n];
        self.scan_counts = vec![0; n];
        for e in &self.events {
            let i = e.slot.index();
            if i >= n {
                continue;
            }
            if e.kind.is_step() {
                self.step_counts[i] += 1;
            }
            if e.kind == EventKind::Scan {
                self.scan_counts[i] += 1;
            }
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), SimError> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e).map_err(SimError::from_json)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parse a JSON-lines trace. Slot count is inferred from the events
    /// unless `n` is given.
    pub fn read_jsonl<R: BufRead>(input: R, n: Option<usize>) -> Result<Self, SimError> {
        let mut events = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str::<Event>(&line).map_err(SimError::from_json)?);
        }
        let n = n.unwrap_or_else(|| events.iter().map(|e| e.slot.0 as usize).max().unwrap_or(0));
        let mut trace = ExecutionTrace {
            events,
            ..ExecutionTrace::new(n)
        };
        trace.recount(n);
        Ok(trace)
    }
}
