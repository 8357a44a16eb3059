use std::sync::Arc;

use super::basic::ceil_lg;
use super::efficient::{Efficient, EfficientPlan};
use super::polylog::{Polylog, PolylogPlan};
use super::profile::Profile;
use super::range::{NameRange, RegisterAllocator};
use super::RenamingError;
use crate::simcore::{Poll, Response, Routine, Value};

#[derive(Clone, Debug)]
pub enum Instance {
    Polylog(Arc<PolylogPlan>),
    Efficient(Arc<EfficientPlan>),
}

impl Instance {
    fn names(&self) -> u64 {
        match self {
            Instance::Polylog(p) => p.names(),
            Instance::Efficient(p) => p.names(),
        }
    }

    fn solo_steps(&self) -> u64 {
        match self {
            Instance::Polylog(p) => p.max_steps(),
            Instance::Efficient(p) => p.solo_steps(),
        }
    }
}

/// A sequence of renaming instances for contention `1, 2, 4, …` on disjoint
/// registers, instance `i` owning the `i`-th consecutive name interval.
#[derive(Clone, Debug)]
pub struct DoublingPlan {
    pub instances: Vec<(Instance, NameRange)>,
}

impl DoublingPlan {
    /// Almost-Adaptive(N): PolyLog-Rename(min(2^j, N), N) for
    /// `j = 0..=ceil(lg n)`.
    pub fn almost_adaptive(
        n_names: u64,
        n: u64,
        profile: &Profile,
        alloc: &mut RegisterAllocator,
    ) -> Result<Self, RenamingError> {
        Self::build(
            n,
            |j, alloc| {
                let k = (1u64 << j).min(n_names);
                PolylogPlan::build(k, n_names, profile, alloc, &format!("almost/{j}"))
                    .map(|p| Instance::Polylog(Arc::new(p)))
            },
            alloc,
        )
    }

    /// Adaptive-Rename: Efficient-Rename(2^i) for `i = 0..=ceil(lg n)`.
    pub fn adaptive(n: u64, profile: &Profile, alloc: &mut RegisterAllocator) -> Result<Self, RenamingError> {
        Self::build(
            n,
            |i, alloc| {
                EfficientPlan::build(1 << i, profile, alloc, &format!("adaptive/{i}"))
                    .map(|p| Instance::Efficient(Arc::new(p)))
            },
            alloc,
        )
    }

    fn build<F>(n: u64, mut make: F, alloc: &mut RegisterAllocator) -> Result<Self, RenamingError>
    where
        F: FnMut(u32, &mut RegisterAllocator) -> Result<Instance, RenamingError>,
    {
        if n == 0 {
            return Err(RenamingError::Config("need at least one process".into()));
        }
        let mut instances = Vec::new();
        let mut next = 1;
        for i in 0..=ceil_lg(n) {
            let inst = make(i, alloc)?;
            let range = NameRange::starting_at(next, inst.names());
            next = range.hi + 1;
            instances.push((inst, range));
        }
        Ok(Self { instances })
    }

    pub fn names(&self) -> u64 {
        self.instances.last().map_or(0, |(_, r)| r.hi)
    }

    /// Largest name any process can get when at most `k` participate: all
    /// are named by instance `ceil(lg k)`.
    pub fn names_for_contention(&self, k: u64) -> u64 {
        let last = (ceil_lg(k.max(1)) as usize).min(self.instances.len() - 1);
        self.instances[last].1.hi
    }

    pub fn solo_steps(&self) -> u64 {
        self.instances.iter().map(|(i, _)| i.solo_steps()).sum()
    }
}

#[derive(Clone, Debug)]
enum Attempt {
    Polylog(Polylog),
    Efficient(Efficient),
}

impl Attempt {
    fn start(inst: &Instance, me: Value, input: u64) -> Self {
        match inst {
            Instance::Polylog(p) => Attempt::Polylog(Polylog::new(Arc::clone(p), me, input)),
            Instance::Efficient(p) => Attempt::Efficient(Efficient::new(Arc::clone(p), me)),
        }
    }
}

/// Tries the instances in order until one yields a name.
#[derive(Clone, Debug)]
pub struct Doubling {
    plan: Arc<DoublingPlan>,
    me: Value,
    input: u64,
    index: usize,
    current: Attempt,
    done: Option<Option<u64>>,
}

impl Doubling {
    pub fn new(plan: Arc<DoublingPlan>, me: Value, input: u64) -> Self {
        let current = Attempt::start(&plan.instances[0].0, me, input);
        Self {
            plan,
            me,
            input,
            index: 0,
            current,
            done: None,
        }
    }
}

impl Routine for Doubling {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        loop {
            if let Some(out) = self.done {
                return Poll::Ready(out);
            }
            let out = match &mut self.current {
                Attempt::Polylog(r) => crate::ready!(r.poll()),
                Attempt::Efficient(r) => crate::ready!(r.poll()),
            };
            match out {
                Some(local) => self.done = Some(Some(self.plan.instances[self.index].1.lo + local - 1)),
                None if self.index + 1 == self.plan.instances.len() => self.done = Some(None),
                None => {
                    self.index += 1;
                    self.current = Attempt::start(&self.plan.instances[self.index].0, self.me, self.input);
                }
            }
        }
    }

    fn resume(&mut self, response: Response) {
        match &mut self.current {
            Attempt::Polylog(r) => r.resume(response),
            Attempt::Efficient(r) => r.resume(response),
        }
    }
}
