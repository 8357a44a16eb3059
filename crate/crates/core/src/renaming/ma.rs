use crate::simcore::{Op, Poll, RegisterId, Response, Routine, Value};

/// Triangular grid of splitters for up to `k` participants. Cell `(r, c)`
/// with `d = r + c <= k - 1` has name `d(d+1)/2 + r + 1`; its registers are
/// `X` at `base + 2(name-1)` and `Y` right after.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaPlan {
    pub k: u64,
    pub base: RegisterId,
}

impl MaPlan {
    pub fn cells(k: u64) -> u64 {
        k * (k + 1) / 2
    }

    pub fn names(&self) -> u64 {
        Self::cells(self.k)
    }

    pub fn registers(&self) -> usize {
        2 * self.names() as usize
    }

    /// Four steps per splitter, at most `k` splitters on any path.
    pub fn max_steps(&self) -> u64 {
        4 * self.k
    }
}

pub fn cell_name(r: u64, c: u64) -> u64 {
    let d = r + c;
    d * (d + 1) / 2 + r + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pc {
    WriteX,
    ReadY,
    WriteY,
    ReadX,
    Done(Option<u64>),
}

/// Walks the grid from `(0, 0)`. At a splitter: `X <- me`; if `Y` is set
/// move right; else set `Y`, and stop if `X` still holds `me`, otherwise
/// move down. Leaving the grid is an overflow and yields no name.
#[derive(Clone, Debug)]
pub struct MaGrid {
    plan: MaPlan,
    me: Value,
    r: u64,
    c: u64,
    pc: Pc,
}

impl MaGrid {
    pub fn new(plan: MaPlan, me: Value) -> Self {
        Self {
            plan,
            me,
            r: 0,
            c: 0,
            pc: Pc::WriteX,
        }
    }

    fn x(&self) -> RegisterId {
        self.plan.base.offset(2 * (cell_name(self.r, self.c) - 1) as usize)
    }

    fn y(&self) -> RegisterId {
        self.x().offset(1)
    }

    fn moved(&mut self) -> Pc {
        if self.r + self.c >= self.plan.k {
            Pc::Done(None)
        } else {
            Pc::WriteX
        }
    }
}

impl Routine for MaGrid {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        Poll::Op(match self.pc {
            Pc::WriteX => Op::Write(self.x(), self.me),
            Pc::ReadY => Op::Read(self.y()),
            Pc::WriteY => Op::Write(self.y(), Value::Int(1)),
            Pc::ReadX => Op::Read(self.x()),
            Pc::Done(out) => return Poll::Ready(out),
        })
    }

    fn resume(&mut self, response: Response) {
        self.pc = match self.pc {
            Pc::WriteX => Pc::ReadY,
            Pc::ReadY if response.value().is_null() => Pc::WriteY,
            Pc::ReadY => {
                self.c += 1;
                self.moved()
            }
            Pc::WriteY => Pc::ReadX,
            Pc::ReadX if response.value() == self.me => Pc::Done(Some(cell_name(self.r, self.c))),
            Pc::ReadX => {
                self.r += 1;
                self.moved()
            }
            Pc::Done(_) => unreachable!("resumed a finished grid walk"),
        };
    }
}
