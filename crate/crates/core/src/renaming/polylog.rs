use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::basic::{basic_range, Basic, BasicPlan};
use super::profile::Profile;
use super::range::RegisterAllocator;
use super::RenamingError;
use crate::expander::Constants;
use crate::simcore::{Poll, Response, Routine, Value};

/// Final-range threshold `32 · 2c_w · k` (`768e⁴k` under the `paper` profile).
pub fn polylog_threshold(k: u64, constants: Constants) -> u64 {
    (64.0 * constants.c_w * k as f64).ceil() as u64
}

/// Input ranges `N_1, N_2, …` of the epochs PolyLog-Rename(k, N) runs, and
/// the range of the last epoch's names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub inputs: Vec<u64>,
    pub output: u64,
}

impl EpochSchedule {
    pub fn epochs(&self) -> usize {
        self.inputs.len()
    }
}

/// Epoch 1 always runs. Another epoch follows while the current output
/// range exceeds the threshold and the next epoch would shrink it.
pub fn polylog_epochs(k: u64, n: u64, constants: Constants) -> Result<EpochSchedule, RenamingError> {
    let threshold = polylog_threshold(k, constants);
    let mut inputs = vec![n];
    let mut output = basic_range(k, n, constants)?;
    while output > threshold {
        let next = basic_range(k, output, constants)?;
        if next >= output {
            break;
        }
        inputs.push(output);
        output = next;
    }
    Ok(EpochSchedule { inputs, output })
}

#[derive(Clone, Debug)]
pub struct PolylogPlan {
    pub k: u64,
    pub epochs: Vec<Arc<BasicPlan>>,
}

impl PolylogPlan {
    pub fn build(
        k: u64,
        n: u64,
        profile: &Profile,
        alloc: &mut RegisterAllocator,
        label: &str,
    ) -> Result<Self, RenamingError> {
        let schedule = polylog_epochs(k, n, profile.constants)?;
        let epochs = schedule
            .inputs
            .iter()
            .enumerate()
            .map(|(j, &nj)| BasicPlan::build(k, nj, profile, alloc, &format!("{label}/epoch{}", j + 1)).map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { k, epochs })
    }

    pub fn names(&self) -> u64 {
        self.epochs.last().expect("at least one epoch").names()
    }

    pub fn max_steps(&self) -> u64 {
        self.epochs.iter().map(|e| e.max_steps()).sum()
    }
}

/// Each epoch renames the previous epoch's name.
#[derive(Clone, Debug)]
pub struct Polylog {
    plan: Arc<PolylogPlan>,
    me: Value,
    epoch: usize,
    current: Basic,
    done: Option<Option<u64>>,
}

impl Polylog {
    pub fn new(plan: Arc<PolylogPlan>, me: Value, input: u64) -> Self {
        let current = Basic::new(Arc::clone(&plan.epochs[0]), me, input);
        Self {
            plan,
            me,
            epoch: 0,
            current,
            done: None,
        }
    }
}

impl Routine for Polylog {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        loop {
            if let Some(out) = self.done {
                return Poll::Ready(out);
            }
            match crate::ready!(self.current.poll()) {
                None => self.done = Some(None),
                Some(name) if self.epoch + 1 == self.plan.epochs.len() => self.done = Some(Some(name)),
                Some(name) => {
                    self.epoch += 1;
                    self.current = Basic::new(Arc::clone(&self.plan.epochs[self.epoch]), self.me, name);
                }
            }
        }
    }

    fn resume(&mut self, response: Response) {
        self.current.resume(response);
    }
}
