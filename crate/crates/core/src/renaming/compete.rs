use crate::simcore::{Op, Poll, RegisterId, Response, Routine, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pc {
    ReadHold,
    WriteHold,
    ReadReg,
    WriteReg,
    Recheck,
    Done(bool),
}

/// Competition for register `reg` guarded by `hold`, for the process whose
/// identity is `me`. Outputs true on a win.
///
/// At most five shared-memory steps: read `hold`, write it, read `reg`,
/// write it, read `hold` again.
#[derive(Clone, Debug)]
pub struct Compete {
    reg: RegisterId,
    hold: RegisterId,
    me: Value,
    pc: Pc,
}

impl Compete {
    pub const MAX_STEPS: u64 = 5;

    pub fn new(me: Value, reg: RegisterId, hold: RegisterId) -> Self {
        Self {
            reg,
            hold,
            me,
            pc: Pc::ReadHold,
        }
    }
}

impl Routine for Compete {
    type Output = bool;

    fn poll(&mut self) -> Poll<bool> {
        Poll::Op(match self.pc {
            Pc::ReadHold | Pc::Recheck => Op::Read(self.hold),
            Pc::WriteHold => Op::Write(self.hold, self.me),
            Pc::ReadReg => Op::Read(self.reg),
            Pc::WriteReg => Op::Write(self.reg, self.me),
            Pc::Done(won) => return Poll::Ready(won),
        })
    }

    fn resume(&mut self, response: Response) {
        self.pc = match self.pc {
            Pc::ReadHold if response.value().is_null() => Pc::WriteHold,
            Pc::ReadHold => Pc::Done(false),
            Pc::WriteHold => Pc::ReadReg,
            Pc::ReadReg if response.value().is_null() => Pc::WriteReg,
            Pc::ReadReg => Pc::Done(false),
            Pc::WriteReg => Pc::Recheck,
            Pc::Recheck => Pc::Done(response.value() == self.me),
            Pc::Done(_) => unreachable!("resumed a finished competition"),
        };
    }
}
