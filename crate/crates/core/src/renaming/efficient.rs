use std::sync::Arc;

use super::ma::{MaGrid, MaPlan};
use super::polylog::{Polylog, PolylogPlan};
use super::profile::Profile;
use super::range::RegisterAllocator;
use super::snapshot::{SnapshotPlan, SnapshotRename};
use super::RenamingError;
use crate::simcore::{Poll, Response, Routine, Value};

/// Splitter grid, then PolyLog-Rename over the grid's names, then the
/// snapshot finisher into `[1, 2k - 1]`.
#[derive(Clone, Debug)]
pub struct EfficientPlan {
    pub k: u64,
    pub ma: MaPlan,
    pub polylog: Arc<PolylogPlan>,
    pub finisher: SnapshotPlan,
}

impl EfficientPlan {
    pub fn build(k: u64, profile: &Profile, alloc: &mut RegisterAllocator, label: &str) -> Result<Self, RenamingError> {
        if k == 0 {
            return Err(RenamingError::Config("efficient renaming needs k >= 1".into()));
        }
        let ma = MaPlan {
            k,
            base: alloc.alloc(format!("{label}/ma"), 2 * MaPlan::cells(k) as usize),
        };
        let polylog = Arc::new(PolylogPlan::build(
            k,
            ma.names(),
            profile,
            alloc,
            &format!("{label}/polylog"),
        )?);
        let finisher = SnapshotPlan::for_contention(alloc.snapshot(), k);
        Ok(Self {
            k,
            ma,
            polylog,
            finisher,
        })
    }

    pub fn names(&self) -> u64 {
        self.finisher.names
    }

    /// Worst case before the finisher, plus the finisher's solo suffix.
    pub fn solo_steps(&self) -> u64 {
        self.ma.max_steps() + self.polylog.max_steps() + SnapshotPlan::SOLO_SUFFIX_STEPS
    }
}

#[derive(Clone, Debug)]
enum Part {
    Ma(MaGrid),
    Polylog(Polylog),
    Finish(SnapshotRename),
}

#[derive(Clone, Debug)]
pub struct Efficient {
    plan: Arc<EfficientPlan>,
    me: Value,
    part: Part,
    done: Option<Option<u64>>,
}

impl Efficient {
    pub fn new(plan: Arc<EfficientPlan>, me: Value) -> Self {
        let part = Part::Ma(MaGrid::new(plan.ma, me));
        Self {
            plan,
            me,
            part,
            done: None,
        }
    }
}

impl Routine for Efficient {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        loop {
            if let Some(out) = self.done {
                return Poll::Ready(out);
            }
            let out = match &mut self.part {
                Part::Ma(r) => crate::ready!(r.poll()),
                Part::Polylog(r) => crate::ready!(r.poll()),
                Part::Finish(r) => crate::ready!(r.poll()),
            };
            match (out, &self.part) {
                (None, _) => self.done = Some(None),
                (Some(name), Part::Ma(_)) => {
                    self.part = Part::Polylog(Polylog::new(Arc::clone(&self.plan.polylog), self.me, name));
                }
                (Some(name), Part::Polylog(_)) => {
                    self.part = Part::Finish(SnapshotRename::new(self.plan.finisher, name));
                }
                (Some(name), Part::Finish(_)) => self.done = Some(Some(name)),
            }
        }
    }

    fn resume(&mut self, response: Response) {
        match &mut self.part {
            Part::Ma(r) => r.resume(response),
            Part::Polylog(r) => r.resume(response),
            Part::Finish(r) => r.resume(response),
        }
    }
}
