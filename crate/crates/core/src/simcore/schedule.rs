//! Schedulers: who moves next, and who crashes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::memory::Slot;
use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Directive {
    Activate(Slot),
    Crash(Slot),
}

impl Directive {
    pub fn slot(self) -> Slot {
        match self {
            Directive::Activate(s) | Directive::Crash(s) => s,
        }
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::Activate(s) => write!(f, "A {}", s.0),
            Directive::Crash(s) => write!(f, "X {}", s.0),
        }
    }
}

/// What a scheduler may look at when choosing the next directive.
#[derive(Debug)]
pub struct SchedulerView<'a> {
    /// Slots that are neither crashed nor halted, ascending.
    pub runnable: &'a [Slot],
    /// Decide events so far, per slot (index 0 is slot 1).
    pub decisions: &'a [u64],
    /// Events recorded so far.
    pub events: u64,
    pub processes: usize,
}

pub trait Scheduler {
    /// `None` ends the run.
    fn next(&mut self, view: &SchedulerView<'_>) -> Option<Directive>;
}

impl<S: Scheduler + ?Sized> Scheduler for Box<S> {
    fn next(&mut self, view: &SchedulerView<'_>) -> Option<Directive> {
        (**self).next(view)
    }
}

/// Cycles through runnable slots in ascending order.
#[derive(Clone, Debug, Default)]
pub struct RoundRobin {
    last: u32,
}

impl Scheduler for RoundRobin {
    fn next(&mut self, view: &SchedulerView<'_>) -> Option<Directive> {
        let next = view
            .runnable
            .iter()
            .find(|s| s.0 > self.last)
            .or_else(|| view.runnable.first())
            .copied()?;
        self.last = next.0;
        Some(Directive::Activate(next))
    }
}

/// Picks a runnable slot uniformly at random. Fair with probability one.
#[derive(Clone, Debug)]
pub struct SeededRandom {
    rng: ChaCha8Rng,
}

impl SeededRandom {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for SeededRandom {
    fn next(&mut self, view: &SchedulerView<'_>) -> Option<Directive> {
        view.runnable.choose(&mut self.rng).map(|&s| Directive::Activate(s))
    }
}

/// Replays a fixed directive list.
#[derive(Clone, Debug)]
pub struct Scripted {
    directives: Vec<Directive>,
    pos: usize,
}

impl Scripted {
    pub fn new(directives: Vec<Directive>) -> Self {
        Self { directives, pos: 0 }
    }

    /// Parse the text format: one `A <slot>` or `X <slot>` per line, `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        parse_directives(text).map(Self::new)
    }
}

impl Scheduler for Scripted {
    fn next(&mut self, _view: &SchedulerView<'_>) -> Option<Directive> {
        let d = self.directives.get(self.pos).copied();
        self.pos += 1;
        d
    }
}

pub fn parse_directives(text: &str) -> Result<Vec<Directive>, SimError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || SimError::Parse {
            line: lineno + 1,
            message: format!("expected `A <slot>` or `X <slot>`, got `{line}`"),
        };
        let mut parts = line.split_whitespace();
        let tag = parts.next().ok_or_else(bad)?;
        let slot: u32 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if slot == 0 || parts.next().is_some() {
            return Err(bad());
        }
        out.push(match tag {
            "A" => Directive::Activate(Slot(slot)),
            "X" => Directive::Crash(Slot(slot)),
            _ => return Err(bad()),
        });
    }
    Ok(out)
}

pub fn format_directives(directives: &[Directive]) -> String {
    directives.iter().map(|d| format!("{d}\n")).collect()
}

/// Parse a crash plan for [`WithCrashes`]: one `<events> <slot>` pair per
/// line, meaning crash `slot` once the trace holds `events` events. `#`
/// starts a comment.
pub fn parse_crash_plan(text: &str) -> Result<Vec<(u64, Slot)>, SimError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || SimError::Parse {
            line: lineno + 1,
            message: format!("expected `<events> <slot>`, got `{line}`"),
        };
        let mut parts = line.split_whitespace();
        let at: u64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let slot: u32 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if slot == 0 || parts.next().is_some() {
            return Err(bad());
        }
        out.push((at, Slot(slot)));
    }
    Ok(out)
}

/// Injects crashes into another scheduler once the trace reaches given
/// lengths. Crashes fire in order of their trigger point.
#[derive(Clone, Debug)]
pub struct WithCrashes<S> {
    inner: S,
    /// `(events recorded, slot)`, sorted by the first component.
    plan: Vec<(u64, Slot)>,
    next: usize,
}

impl<S: Scheduler> WithCrashes<S> {
    pub fn new(inner: S, mut plan: Vec<(u64, Slot)>) -> Self {
        plan.sort();
        Self { inner, plan, next: 0 }
    }

    /// Crash up to `max_crashes` randomly chosen slots (never all of them)
    /// at random points within the first `horizon` events.
    pub fn random(inner: S, n: usize, max_crashes: usize, horizon: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let crashes = if n == 0 {
            0
        } else {
            rng.gen_range(0..=max_crashes.min(n - 1))
        };
        let mut slots: Vec<Slot> = (0..n).map(Slot::from_index).collect();
        slots.shuffle(&mut rng);
        let plan = slots
            .into_iter()
            .take(crashes)
            .map(|s| (rng.gen_range(0..=horizon), s))
            .collect();
        Self::new(inner, plan)
    }

    pub fn plan(&self) -> &[(u64, Slot)] {
        &self.plan
    }
}

impl<S: Scheduler> Scheduler for WithCrashes<S> {
    fn next(&mut self, view: &SchedulerView<'_>) -> Option<Directive> {
        if let Some(&(at, slot)) = self.plan.get(self.next) {
            if view.events >= at {
                self.next += 1;
                return Some(Directive::Crash(slot));
            }
        }
        self.inner.next(view)
    }
}

/// Serializable choice of a generator-driven scheduler.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    RoundRobin,
    SeededRandom { seed: u64 },
    Scripted(Vec<Directive>),
}

impl ScheduleKind {
    pub fn build(&self) -> Box<dyn Scheduler> {
        match self {
            ScheduleKind::RoundRobin => Box::new(RoundRobin::default()),
            ScheduleKind::SeededRandom { seed } => Box::new(SeededRandom::new(*seed)),
            ScheduleKind::Scripted(d) => Box::new(Scripted::new(d.clone())),
        }
    }
}
