use std::sync::Arc;

use super::compete::Compete;
use crate::expander::BipartiteGraph;
use crate::simcore::{Poll, RegisterId, Response, Routine, Value};

/// One Majority instance: a certified graph and a register pair `(R_w, H_w)`
/// per output `w`, at `base + 2w` and `base + 2w + 1`. Winning output `w`
/// yields name `name_offset + w + 1`.
#[derive(Clone, Debug)]
pub struct MajorityStage {
    pub graph: Arc<BipartiteGraph>,
    pub base: RegisterId,
    pub name_offset: u64,
}

impl MajorityStage {
    pub fn registers(&self) -> usize {
        2 * self.graph.w_size()
    }

    pub fn names(&self) -> u64 {
        self.graph.w_size() as u64
    }

    pub fn max_steps(&self) -> u64 {
        Compete::MAX_STEPS * self.graph.delta() as u64
    }
}

/// A process with input name `input` (1-based, at most `|V|`) competes for
/// its neighbors in list order and keeps the first one it wins.
#[derive(Clone, Debug)]
pub struct Majority {
    stage: MajorityStage,
    me: Value,
    input: usize,
    next: usize,
    current: Option<Compete>,
    done: Option<Option<u64>>,
}

impl Majority {
    pub fn new(stage: MajorityStage, me: Value, input: u64) -> Self {
        let input = input as usize;
        let done = if input == 0 || input > stage.graph.v_size() {
            Some(None)
        } else {
            None
        };
        Self {
            stage,
            me,
            input: input.saturating_sub(1),
            next: 0,
            current: None,
            done,
        }
    }

    fn neighbor(&self, i: usize) -> u32 {
        self.stage.graph.neighbors(self.input)[i]
    }
}

impl Routine for Majority {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        loop {
            if let Some(out) = self.done {
                return Poll::Ready(out);
            }
            if let Some(c) = &mut self.current {
                let won = crate::ready!(c.poll());
                self.current = None;
                if won {
                    let w = self.neighbor(self.next - 1) as u64;
                    self.done = Some(Some(self.stage.name_offset + w + 1));
                }
                continue;
            }
            if self.next == self.stage.graph.delta() {
                self.done = Some(None);
                continue;
            }
            let w = self.neighbor(self.next) as usize;
            self.next += 1;
            self.current = Some(Compete::new(
                self.me,
                self.stage.base.offset(2 * w),
                self.stage.base.offset(2 * w + 1),
            ));
        }
    }

    fn resume(&mut self, response: Response) {
        self.current
            .as_mut()
            .expect("resume without a pending competition")
            .resume(response);
    }
}
