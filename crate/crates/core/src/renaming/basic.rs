use std::sync::Arc;

use super::majority::{Majority, MajorityStage};
use super::profile::Profile;
use super::range::RegisterAllocator;
use super::RenamingError;
use crate::expander::{Constants, ExpanderParams};
use crate::simcore::{Poll, Response, Routine, Value};

/// Contender bounds `ℓ_i = ceil(k / 2^i)` for stages `i = 0..=ceil(lg k)`.
pub fn stage_sizes(k: u64) -> Vec<u64> {
    assert!(k >= 1, "at least one contender");
    let stages = ceil_lg(k) + 1;
    (0..stages).map(|i| k.div_ceil(1 << i)).collect()
}

pub fn ceil_lg(k: u64) -> u32 {
    assert!(k >= 1);
    u64::BITS - (k - 1).leading_zeros()
}

/// Total names of Basic-Rename(k, n_in): the sum of the stage output sides.
pub fn basic_range(k: u64, n_in: u64, constants: Constants) -> Result<u64, RenamingError> {
    stage_sizes(k)
        .into_iter()
        .map(|l| {
            ExpanderParams::from_constants(n_in as usize, l as usize, constants)
                .map(|p| p.w_size as u64)
                .map_err(RenamingError::from)
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct BasicPlan {
    pub k: u64,
    pub inputs: u64,
    pub stages: Vec<MajorityStage>,
}

impl BasicPlan {
    pub fn build(
        k: u64,
        inputs: u64,
        profile: &Profile,
        alloc: &mut RegisterAllocator,
        label: &str,
    ) -> Result<Self, RenamingError> {
        if k == 0 || k > inputs {
            return Err(RenamingError::Config(format!(
                "basic renaming needs 1 <= k <= N, got k={k}, N={inputs}"
            )));
        }
        let mut stages = Vec::new();
        let mut offset = 0;
        for (i, l) in stage_sizes(k).into_iter().enumerate() {
            let graph = profile.graph(inputs as usize, l as usize)?;
            let base = alloc.alloc(format!("{label}/stage{i}"), 2 * graph.w_size());
            let stage = MajorityStage {
                graph,
                base,
                name_offset: offset,
            };
            offset += stage.names();
            stages.push(stage);
        }
        Ok(Self { k, inputs, stages })
    }

    pub fn names(&self) -> u64 {
        self.stages.iter().map(MajorityStage::names).sum()
    }

    pub fn max_steps(&self) -> u64 {
        self.stages.iter().map(MajorityStage::max_steps).sum()
    }
}

/// Runs the stages in order until one names the process.
#[derive(Clone, Debug)]
pub struct Basic {
    plan: Arc<BasicPlan>,
    me: Value,
    input: u64,
    stage: usize,
    current: Majority,
    done: Option<Option<u64>>,
}

impl Basic {
    pub fn new(plan: Arc<BasicPlan>, me: Value, input: u64) -> Self {
        let current = Majority::new(plan.stages[0].clone(), me, input);
        Self {
            plan,
            me,
            input,
            stage: 0,
            current,
            done: None,
        }
    }
}

impl Routine for Basic {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        loop {
            if let Some(out) = self.done {
                return Poll::Ready(out);
            }
            match crate::ready!(self.current.poll()) {
                Some(name) => self.done = Some(Some(name)),
                None if self.stage + 1 == self.plan.stages.len() => self.done = Some(None),
                None => {
                    self.stage += 1;
                    self.current = Majority::new(self.plan.stages[self.stage].clone(), self.me, self.input);
                }
            }
        }
    }

    fn resume(&mut self, response: Response) {
        self.current.resume(response);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_sizes_halve_with_ceilings() {
        assert_eq!(stage_sizes(1), vec![1]);
        assert_eq!(stage_sizes(4), vec![4, 2, 1]);
        assert_eq!(stage_sizes(5), vec![5, 3, 2, 1]);
        assert_eq!(stage_sizes(8), vec![8, 4, 2, 1]);
    }

    #[test]
    fn ceil_lg_values() {
        let got: Vec<u32> = (1..=9).map(ceil_lg).collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 3, 3, 4]);
    }
}
