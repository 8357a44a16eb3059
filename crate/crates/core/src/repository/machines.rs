use super::naming::{Acquire, Confirm, LocalNamingState};
use super::{RepoLayout, RequestScript};
use crate::simcore::{Action, Decision, Op, Poll, Response, Routine, Slot, StepMachine, Value};

#[derive(Clone, Debug)]
enum SelfishPhase {
    Query,
    Acquire(Box<Acquire>, u64),
    Store(u64, u64),
    Ack(u64, u64),
    Violation(String),
    Done,
}

/// Selfish-Deposit: every acquired name is used as the address of the
/// process's own next deposit.
#[derive(Clone, Debug)]
pub struct SelfishDepositor {
    me: Slot,
    layout: RepoLayout,
    state: Option<LocalNamingState>,
    script: RequestScript,
    phase: SelfishPhase,
}

impl SelfishDepositor {
    pub fn new(me: Slot, layout: RepoLayout, script: RequestScript) -> Self {
        Self {
            me,
            layout,
            state: Some(LocalNamingState::new(layout.n)),
            script,
            phase: SelfishPhase::Query,
        }
    }
}

impl StepMachine for SelfishDepositor {
    fn action(&mut self) -> Action {
        loop {
            match &mut self.phase {
                SelfishPhase::Query => {
                    self.phase = match self.script.query() {
                        Ok(Some(v)) => {
                            let state = self.state.take().expect("state is home between deposits");
                            SelfishPhase::Acquire(
                                Box::new(Acquire::new(self.me, self.layout, Confirm::Register, state)),
                                v,
                            )
                        }
                        Ok(None) => SelfishPhase::Done,
                        Err(e) => SelfishPhase::Violation(e.to_string()),
                    }
                }
                SelfishPhase::Acquire(acq, v) => match acq.poll() {
                    Poll::Op(op) => return Action::Op(op),
                    Poll::Ready((x, state)) => {
                        self.state = Some(state);
                        self.phase = SelfishPhase::Store(x, *v);
                    }
                },
                SelfishPhase::Store(x, v) => return Action::Op(Op::Write(self.layout.dedicated(*x), Value::Int(*v))),
                SelfishPhase::Ack(x, v) => {
                    return Action::Decide(Decision::Ack {
                        register: self.layout.dedicated(*x),
                        value: *v,
                    })
                }
                SelfishPhase::Violation(msg) => return Action::Decide(Decision::Violation(msg.clone())),
                SelfishPhase::Done => return Action::Halt,
            }
        }
    }

    fn complete(&mut self, response: Response) {
        self.phase = match std::mem::replace(&mut self.phase, SelfishPhase::Done) {
            SelfishPhase::Acquire(mut acq, v) => {
                acq.resume(response);
                SelfishPhase::Acquire(acq, v)
            }
            SelfishPhase::Store(x, v) => SelfishPhase::Ack(x, v),
            SelfishPhase::Ack(..) => {
                self.script.ack();
                SelfishPhase::Query
            }
            SelfishPhase::Violation(_) => SelfishPhase::Done,
            SelfishPhase::Query | SelfishPhase::Done => unreachable!("no pending action"),
        };
    }
}

#[derive(Clone, Debug)]
enum NamingPhase {
    Query,
    Acquire(Box<Acquire>),
    Commit(u64),
    Violation(String),
    Done,
}

/// Unbounded naming, non-blocking: each request commits one more integer
/// after checking every availability board.
#[derive(Clone, Debug)]
pub struct NamingMachine {
    me: Slot,
    layout: RepoLayout,
    state: Option<LocalNamingState>,
    script: RequestScript,
    phase: NamingPhase,
}

impl NamingMachine {
    pub fn new(me: Slot, layout: RepoLayout, script: RequestScript) -> Self {
        Self {
            me,
            layout,
            state: Some(LocalNamingState::new(layout.n)),
            script,
            phase: NamingPhase::Query,
        }
    }
}

impl StepMachine for NamingMachine {
    fn action(&mut self) -> Action {
        loop {
            match &mut self.phase {
                NamingPhase::Query => {
                    self.phase = match self.script.query() {
                        Ok(Some(_)) => {
                            let state = self.state.take().expect("state is home between commits");
                            NamingPhase::Acquire(Box::new(Acquire::new(self.me, self.layout, Confirm::Boards, state)))
                        }
                        Ok(None) => NamingPhase::Done,
                        Err(e) => NamingPhase::Violation(e.to_string()),
                    }
                }
                NamingPhase::Acquire(acq) => match acq.poll() {
                    Poll::Op(op) => return Action::Op(op),
                    Poll::Ready((x, state)) => {
                        self.state = Some(state);
                        self.phase = NamingPhase::Commit(x);
                    }
                },
                NamingPhase::Commit(x) => return Action::Decide(Decision::Commit(*x)),
                NamingPhase::Violation(msg) => return Action::Decide(Decision::Violation(msg.clone())),
                NamingPhase::Done => return Action::Halt,
            }
        }
    }

    fn complete(&mut self, response: Response) {
        self.phase = match std::mem::replace(&mut self.phase, NamingPhase::Done) {
            NamingPhase::Acquire(mut acq) => {
                acq.resume(response);
                NamingPhase::Acquire(acq)
            }
            NamingPhase::Commit(_) => {
                self.script.ack();
                NamingPhase::Query
            }
            NamingPhase::Violation(_) => NamingPhase::Done,
            NamingPhase::Query | NamingPhase::Done => unreachable!("no pending action"),
        };
    }
}

#[derive(Clone, Debug)]
enum Producer {
    /// Reading `Help[me, q]`.
    Read(usize),
    Acquire(usize, Box<Acquire>),
    Write(usize, u64),
}

#[derive(Clone, Debug)]
enum Consumer {
    Query,
    /// Script exhausted.
    Idle,
    /// Reading `Help[r, me]` with value `v` to deposit.
    Read(usize, u64),
    Store(usize, u64, u64),
    Ack(usize, u64, u64),
    /// Erasing the used name from `Help[r, me]`.
    Clear(usize),
    Violation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Turn {
    Producer,
    Consumer,
}

/// Altruistic-Deposit: a producer loop fills `Help[me, *]` with freshly
/// committed names, a consumer loop deposits at names found in
/// `Help[*, me]`. The two loops alternate one action each.
#[derive(Clone, Debug)]
pub struct AltruisticDepositor {
    me: Slot,
    layout: RepoLayout,
    state: Option<LocalNamingState>,
    script: RequestScript,
    producer: Producer,
    consumer: Consumer,
    /// Next column the consumer looks at.
    cursor: usize,
    turn: Turn,
    /// Consecutive producer reads that found a name already in place.
    full_reads: usize,
}

impl AltruisticDepositor {
    pub fn new(me: Slot, layout: RepoLayout, script: RequestScript) -> Self {
        Self {
            me,
            layout,
            state: Some(LocalNamingState::new(layout.n)),
            script,
            producer: Producer::Read(0),
            consumer: Consumer::Query,
            cursor: 0,
            turn: Turn::Producer,
            full_reads: 0,
        }
    }

    fn consumer_action(&mut self) -> Option<Action> {
        loop {
            match &self.consumer {
                Consumer::Query => {
                    self.consumer = match self.script.query() {
                        Ok(Some(v)) => Consumer::Read(self.cursor, v),
                        Ok(None) => Consumer::Idle,
                        Err(e) => Consumer::Violation(e.to_string()),
                    }
                }
                Consumer::Idle => return None,
                Consumer::Read(r, _) => {
                    return Some(Action::Op(Op::Read(self.layout.help(Slot::from_index(*r), self.me))))
                }
                Consumer::Store(_, x, v) => {
                    return Some(Action::Op(Op::Write(self.layout.dedicated(*x), Value::Int(*v))))
                }
                Consumer::Ack(_, x, v) => {
                    return Some(Action::Decide(Decision::Ack {
                        register: self.layout.dedicated(*x),
                        value: *v,
                    }))
                }
                Consumer::Clear(r) => {
                    return Some(Action::Op(Op::Write(
                        self.layout.help(Slot::from_index(*r), self.me),
                        Value::Null,
                    )))
                }
                Consumer::Violation(msg) => return Some(Action::Decide(Decision::Violation(msg.clone()))),
            }
        }
    }

    fn producer_action(&mut self) -> Action {
        loop {
            match &mut self.producer {
                Producer::Read(q) => return Action::Op(Op::Read(self.layout.help(self.me, Slot::from_index(*q)))),
                Producer::Acquire(q, acq) => match acq.poll() {
                    Poll::Op(op) => return Action::Op(op),
                    Poll::Ready((x, state)) => {
                        self.state = Some(state);
                        self.producer = Producer::Write(*q, x);
                    }
                },
                Producer::Write(q, x) => {
                    return Action::Op(Op::Write(
                        self.layout.help(self.me, Slot::from_index(*q)),
                        Value::Int(*x),
                    ))
                }
            }
        }
    }

    fn consumer_active(&mut self) -> bool {
        self.consumer_action().is_some()
    }

    fn serving(&mut self) -> Turn {
        if self.turn == Turn::Consumer && self.consumer_active() {
            Turn::Consumer
        } else {
            Turn::Producer
        }
    }

    fn complete_consumer(&mut self, response: Response) {
        let n = self.layout.n;
        self.consumer = match std::mem::replace(&mut self.consumer, Consumer::Idle) {
            Consumer::Read(r, v) => match response.value().as_int() {
                Some(x) => Consumer::Store(r, x, v),
                None => Consumer::Read((r + 1) % n, v),
            },
            Consumer::Store(r, x, v) => Consumer::Ack(r, x, v),
            Consumer::Ack(r, _, _) => {
                self.script.ack();
                Consumer::Clear(r)
            }
            Consumer::Clear(r) => {
                self.cursor = (r + 1) % n;
                Consumer::Query
            }
            Consumer::Violation(_) => Consumer::Idle,
            Consumer::Query | Consumer::Idle => unreachable!("no pending consumer action"),
        };
    }

    fn complete_producer(&mut self, response: Response) {
        let n = self.layout.n;
        self.producer = match std::mem::replace(&mut self.producer, Producer::Read(0)) {
            Producer::Read(q) => {
                if response.value().is_null() {
                    self.full_reads = 0;
                    let state = self.state.take().expect("state is home between acquisitions");
                    Producer::Acquire(q, Box::new(Acquire::new(self.me, self.layout, Confirm::Boards, state)))
                } else {
                    self.full_reads += 1;
                    Producer::Read((q + 1) % n)
                }
            }
            Producer::Acquire(q, mut acq) => {
                acq.resume(response);
                Producer::Acquire(q, acq)
            }
            Producer::Write(q, _) => Producer::Read((q + 1) % n),
        };
    }
}

impl StepMachine for AltruisticDepositor {
    fn action(&mut self) -> Action {
        match self.serving() {
            Turn::Consumer => self.consumer_action().expect("consumer is active"),
            Turn::Producer => self.producer_action(),
        }
    }

    fn complete(&mut self, response: Response) {
        match self.serving() {
            Turn::Consumer => {
                self.complete_consumer(response);
                self.turn = Turn::Producer;
            }
            Turn::Producer => {
                self.complete_producer(response);
                self.turn = Turn::Consumer;
            }
        }
    }

    fn is_idle(&self) -> bool {
        matches!(self.consumer, Consumer::Idle)
            && matches!(self.producer, Producer::Read(_))
            && self.full_reads >= self.layout.n
    }
}
