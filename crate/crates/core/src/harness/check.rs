//! Invariant suites evaluated over finished traces.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::HarnessError;
use crate::repository::RepoLayout;
use crate::simcore::{Decision, EventKind, ExecutionTrace, Slot, Value};
use crate::storecollect::{op_records, OpKind, ScriptOp, StoreCollect};

/// An invariant that failed at a trace event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Sequence number of the offending event.
    pub event: u64,
    pub invariant: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}: {}", self.event, self.invariant, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// No name decided twice, no register won twice.
    Renaming,
    /// Dedicated registers are written at most once, never after an ack.
    Persistence,
    /// No two acks name the same register.
    Deposits,
    /// No integer committed twice.
    Commits,
    /// Completed stores are visible to later collects; collected values are
    /// fresh.
    Collect,
    /// Control flags only ever receive 1.
    Flags,
    /// Help cells: names written by the row owner over Null, cleared by the
    /// column owner.
    Help,
    /// Every suite the context has the information for.
    All,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Renaming,
        Suite::Persistence,
        Suite::Deposits,
        Suite::Commits,
        Suite::Collect,
        Suite::Flags,
        Suite::Help,
        Suite::All,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Suite::Renaming => "renaming",
            Suite::Persistence => "persistence",
            Suite::Deposits => "deposits",
            Suite::Commits => "commits",
            Suite::Collect => "collect",
            Suite::Flags => "flags",
            Suite::Help => "help",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.id() == s)
            .ok_or_else(|| HarnessError::UnknownSuite(s.to_string()))
    }
}

/// The `n × n` Help matrix starting at register `base`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpGrid {
    pub base: usize,
    pub n: usize,
}

impl HelpGrid {
    /// Row and column slots of a register in the grid.
    fn cell(&self, reg: usize) -> Option<(Slot, Slot)> {
        let off = reg.checked_sub(self.base)?;
        (off < self.n * self.n).then(|| (Slot::from_index(off / self.n), Slot::from_index(off % self.n)))
    }
}

/// Where the checked structures live in memory. Suites whose information is
/// missing report a violation rather than silently passing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedicated_base: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub help: Option<HelpGrid>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub control_registers: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ops: Option<Vec<ScriptOp>>,
}

impl CheckContext {
    pub fn for_repository(layout: &RepoLayout) -> Self {
        Self {
            dedicated_base: Some(layout.dedicated_base),
            help: Some(HelpGrid {
                base: layout.help_base,
                n: layout.n,
            }),
            ..Self::default()
        }
    }

    pub fn for_store_collect(sc: &StoreCollect, ops: &[ScriptOp]) -> Self {
        Self {
            control_registers: (0..sc.layout.intervals).map(|i| sc.layout.control(i).0).collect(),
            ops: Some(ops.to_vec()),
            ..Self::default()
        }
    }

    /// Suites that `All` expands to under this context.
    pub fn applicable(&self) -> Vec<Suite> {
        let mut out = vec![Suite::Renaming, Suite::Deposits, Suite::Commits];
        if self.dedicated_base.is_some() {
            out.push(Suite::Persistence);
        }
        if self.ops.is_some() {
            out.push(Suite::Collect);
        }
        if !self.control_registers.is_empty() {
            out.push(Suite::Flags);
        }
        if self.help.is_some() {
            out.push(Suite::Help);
        }
        out
    }
}

/// Run one suite over a trace. Violations come back ordered by event.
pub fn check_trace(trace: &ExecutionTrace, suite: Suite, ctx: &CheckContext) -> Vec<Violation> {
    let mut out = match suite {
        Suite::Renaming => renaming(trace),
        Suite::Persistence => match ctx.dedicated_base {
            Some(base) => persistence(trace, base),
            None => missing(suite, "dedicated register base"),
        },
        Suite::Deposits => deposits(trace),
        Suite::Commits => commits(trace),
        Suite::Collect => match &ctx.ops {
            Some(ops) => collect(trace, ops),
            None => missing(suite, "op script"),
        },
        Suite::Flags => {
            if ctx.control_registers.is_empty() {
                missing(suite, "control registers")
            } else {
                flags(trace, &ctx.control_registers)
            }
        }
        Suite::Help => match ctx.help {
            Some(grid) => help(trace, grid),
            None => missing(suite, "Help grid"),
        },
        Suite::All => ctx
            .applicable()
            .into_iter()
            .flat_map(|s| check_trace(trace, s, ctx))
            .collect(),
    };
    out.sort_by_key(|v| v.event);
    out
}

/// Parse a suite id and run it.
pub fn check_trace_by_id(trace: &ExecutionTrace, id: &str, ctx: &CheckContext) -> Result<Vec<Violation>, HarnessError> {
    Ok(check_trace(trace, id.parse()?, ctx))
}

fn missing(suite: Suite, what: &str) -> Vec<Violation> {
    vec![Violation {
        event: 0,
        invariant: suite.id().into(),
        message: format!("context lacks the {what}"),
    }]
}

fn violation(event: u64, suite: Suite, message: String) -> Violation {
    Violation {
        event,
        invariant: suite.id().into(),
        message,
    }
}

fn renaming(trace: &ExecutionTrace) -> Vec<Violation> {
    let mut names: BTreeMap<u64, Slot> = BTreeMap::new();
    let mut wins: BTreeMap<usize, Slot> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &trace.events {
        match e.decision() {
            Some(Decision::Name(x)) => {
                if let Some(first) = names.insert(*x, e.slot) {
                    out.push(violation(
                        e.seq,
                        Suite::Renaming,
                        format!("name {x} decided by slot {} after slot {}", e.slot.0, first.0),
                    ));
                }
            }
            Some(Decision::Win { register }) => {
                if let Some(first) = wins.insert(register.0, e.slot) {
                    out.push(violation(
                        e.seq,
                        Suite::Renaming,
                        format!(
                            "register {} won by slot {} after slot {}",
                            register.0, e.slot.0, first.0
                        ),
                    ));
                }
            }
            _ => {}
        }
    }
    out
}

fn persistence(trace: &ExecutionTrace, base: usize) -> Vec<Violation> {
    let mut written: BTreeMap<u64, u64> = BTreeMap::new();
    let mut acked: BTreeSet<u64> = BTreeSet::new();
    let mut out = Vec::new();
    for e in &trace.events {
        if e.kind == EventKind::Write {
            let Some(reg) = e.reg.filter(|&r| r >= base as u64) else {
                continue;
            };
            let i = reg - base as u64 + 1;
            if acked.contains(&i) {
                out.push(violation(
                    e.seq,
                    Suite::Persistence,
                    format!("R_{i} written after its ack"),
                ));
            } else if let Some(first) = written.get(&i) {
                out.push(violation(
                    e.seq,
                    Suite::Persistence,
                    format!("R_{i} written again (first at event {first})"),
                ));
            }
            written.entry(i).or_insert(e.seq);
        }
        if let Some(Decision::Ack { register, .. }) = e.decision() {
            if register.0 >= base {
                acked.insert((register.0 - base) as u64 + 1);
            }
        }
    }
    out
}

fn deposits(trace: &ExecutionTrace) -> Vec<Violation> {
    let mut seen: BTreeMap<usize, u64> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &trace.events {
        if let Some(Decision::Ack { register, .. }) = e.decision() {
            if let Some(first) = seen.insert(register.0, e.seq) {
                out.push(violation(
                    e.seq,
                    Suite::Deposits,
                    format!("register {} acked again (first at event {first})", register.0),
                ));
            }
        }
    }
    out
}

fn commits(trace: &ExecutionTrace) -> Vec<Violation> {
    let mut seen: BTreeMap<u64, Slot> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &trace.events {
        if let Some(Decision::Commit(x)) = e.decision() {
            if let Some(first) = seen.insert(*x, e.slot) {
                out.push(violation(
                    e.seq,
                    Suite::Commits,
                    format!("{x} committed by slot {} after slot {}", e.slot.0, first.0),
                ));
            }
        }
    }
    out
}

/// For each collect: every process with a store decided before the collect
/// began must appear, with the value of a store no older than its last
/// completed one and begun before the collect finished.
fn collect(trace: &ExecutionTrace, ops: &[ScriptOp]) -> Vec<Violation> {
    let records = op_records(ops, trace);
    let mut history: BTreeMap<u64, Vec<_>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == OpKind::Store) {
        history.entry(r.process as u64).or_default().push(r);
    }
    let mut out = Vec::new();
    for c in records.iter().filter(|r| r.kind == OpKind::Collect) {
        let (Some(start), Some(end), Some(found)) = (c.first_event, c.decided_at, &c.result) else {
            continue;
        };
        let got: BTreeMap<u64, u64> = found.iter().copied().collect();
        for (&p, &v) in &got {
            if !history.contains_key(&p) {
                out.push(violation(
                    end,
                    Suite::Collect,
                    format!("collect returned {v} for {p}, which never stored"),
                ));
            }
        }
        for (&p, stores) in &history {
            let oldest = stores.iter().rposition(|s| s.decided_at.is_some_and(|d| d < start));
            let newest = stores.iter().rposition(|s| s.first_event.is_some_and(|f| f < end));
            match got.get(&p) {
                Some(&v) => {
                    let lo = oldest.unwrap_or(0);
                    let fresh = newest.is_some_and(|hi| (lo..=hi).any(|i| stores[i].value == Some(v)));
                    if !fresh {
                        out.push(violation(
                            end,
                            Suite::Collect,
                            format!(
                                "collect (request {}) returned {v} for {p}, not a current value",
                                c.request
                            ),
                        ));
                    }
                }
                None if oldest.is_some() => out.push(violation(
                    end,
                    Suite::Collect,
                    format!("collect (request {}) missed the completed store of {p}", c.request),
                )),
                None => {}
            }
        }
    }
    out
}

fn flags(trace: &ExecutionTrace, controls: &[usize]) -> Vec<Violation> {
    let controls: BTreeSet<u64> = controls.iter().map(|&r| r as u64).collect();
    trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Write && e.reg.is_some_and(|r| controls.contains(&r)))
        .filter(|e| e.value() != Some(Value::Int(1)))
        .map(|e| {
            violation(
                e.seq,
                Suite::Flags,
                format!("control register {} set to {:?}", e.reg.unwrap_or_default(), e.value()),
            )
        })
        .collect()
}

fn help(trace: &ExecutionTrace, grid: HelpGrid) -> Vec<Violation> {
    let mut cells: BTreeMap<usize, Value> = BTreeMap::new();
    let mut out = Vec::new();
    for e in trace.events.iter().filter(|e| e.kind == EventKind::Write) {
        let Some(reg) = e.reg.map(|r| r as usize) else { continue };
        let Some((row, col)) = grid.cell(reg) else { continue };
        let before = cells.get(&reg).copied().unwrap_or(Value::Null);
        let after = e.value().unwrap_or(Value::Null);
        let problem = match after {
            Value::Null if e.slot != col => Some(format!("Help[{},{}] cleared by slot {}", row.0, col.0, e.slot.0)),
            Value::Null if before.is_null() => Some(format!("Help[{},{}] cleared while empty", row.0, col.0)),
            Value::Null => None,
            _ if e.slot != row => Some(format!("Help[{},{}] filled by slot {}", row.0, col.0, e.slot.0)),
            _ if !before.is_null() => Some(format!(
                "Help[{},{}] overwritten while holding {before:?}",
                row.0, col.0
            )),
            _ => None,
        };
        if let Some(msg) = problem {
            out.push(violation(e.seq, Suite::Help, msg));
        }
        cells.insert(reg, after);
    }
    out
}
