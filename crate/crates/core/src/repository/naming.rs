use serde::{Deserialize, Serialize};

use super::RepoLayout;
use crate::simcore::{Op, Poll, Response, Routine, Slot, Value};

/// A process's `2n - 1` candidate indices and the pointer past them.
///
/// Entries are kept in board order: entry `i` is published in register `i`
/// of the process's availability board, and replacing an entry reuses its
/// position. [`LocalNamingState::list`] gives the sorted list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalNamingState {
    entries: Vec<u64>,
    pointer: u64,
}

impl LocalNamingState {
    /// `[1, 2n - 1]` with pointer `2n`.
    pub fn new(n: usize) -> Self {
        let len = 2 * n as u64 - 1;
        Self {
            entries: (1..=len).collect(),
            pointer: len + 1,
        }
    }

    /// Distinct entries below `pointer`.
    pub fn from_parts(entries: Vec<u64>, pointer: u64) -> Self {
        let mut sorted = entries.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), entries.len(), "duplicate entries");
        assert!(
            entries.iter().all(|&e| e >= 1 && e < pointer),
            "entries must lie in [1, pointer)"
        );
        Self { entries, pointer }
    }

    pub fn list(&self) -> Vec<u64> {
        let mut l = self.entries.clone();
        l.sort_unstable();
        l
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn pointer(&self) -> u64 {
        self.pointer
    }

    pub fn smallest(&self) -> u64 {
        self.entries.iter().copied().min().expect("lists are never empty")
    }

    fn position(&self, x: u64) -> Option<usize> {
        self.entries.iter().position(|&e| e == x)
    }

    /// Board registers to write so the board mirrors this state, given the
    /// state it mirrored before. Entries first, pointer last.
    fn board_writes(&self, before: &LocalNamingState, layout: &RepoLayout) -> Vec<(usize, u64)> {
        let mut out: Vec<(usize, u64)> = self
            .entries
            .iter()
            .zip(&before.entries)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (&a, _))| (i, a))
            .collect();
        if self.pointer != before.pointer {
            out.push((layout.board_len() - 1, self.pointer));
        }
        out
    }
}

/// Whether `x` is available for naming according to a board read as `board`
/// (`Null` registers hold their initial contents).
pub fn board_allows(board: &[Value], x: u64) -> bool {
    let last = board.len() - 1;
    let pointer = board[last].as_int().unwrap_or(board.len() as u64);
    x >= pointer
        || board[..last]
            .iter()
            .enumerate()
            .any(|(i, v)| v.as_int().unwrap_or(i as u64 + 1) == x)
}

/// Order in which a board of `len` registers is read: the pointer first,
/// then the entries. Owners write entries before the pointer, so an entry
/// added during the read is either seen or lies at or above the pointer
/// read, and a torn read never hides an available integer.
pub fn board_read_order(len: usize, k: usize) -> usize {
    if k == 0 {
        len - 1
    } else {
        k - 1
    }
}

/// Choosing by rank: `r` is the rank of `me` among the slots whose segment
/// holds an entry of `list`; the result is the `r`-th smallest entry of
/// `list` not present anywhere in `view`. `None` only if the list is too
/// short, which `2n - 1` entries rule out.
pub fn choose_by_rank(me: Slot, view: &[Value], list: &[u64]) -> Option<u64> {
    let in_list = |v: &Value| v.as_int().is_some_and(|x| list.contains(&x));
    let rank = view[..me.index()].iter().filter(|v| in_list(v)).count() + 1;
    let seen: Vec<u64> = view.iter().filter_map(Value::as_int).collect();
    list.iter().copied().filter(|x| !seen.contains(x)).nth(rank - 1)
}

/// Verifying the list: read `R_j` for each entry `j` in increasing order;
/// an occupied entry is replaced by the first empty register found scanning
/// from the pointer, which then moves past it.
#[derive(Clone, Debug)]
pub struct VerifyList {
    layout: RepoLayout,
    state: LocalNamingState,
    /// Positions still to check, in increasing entry order.
    todo: Vec<usize>,
    /// Position being replaced while scanning from the pointer.
    replacing: Option<usize>,
}

impl VerifyList {
    pub fn new(layout: RepoLayout, state: LocalNamingState) -> Self {
        let mut todo: Vec<usize> = (0..state.entries.len()).collect();
        todo.sort_by_key(|&i| std::cmp::Reverse(state.entries[i]));
        Self {
            layout,
            state,
            todo,
            replacing: None,
        }
    }
}

impl Routine for VerifyList {
    type Output = LocalNamingState;

    fn poll(&mut self) -> Poll<LocalNamingState> {
        if self.replacing.is_some() {
            return Poll::Op(Op::Read(self.layout.dedicated(self.state.pointer)));
        }
        match self.todo.last() {
            Some(&pos) => Poll::Op(Op::Read(self.layout.dedicated(self.state.entries[pos]))),
            None => Poll::Ready(self.state.clone()),
        }
    }

    fn resume(&mut self, response: Response) {
        let empty = response.value().is_null();
        match self.replacing {
            Some(pos) => {
                if empty {
                    self.state.entries[pos] = self.state.pointer;
                    self.replacing = None;
                }
                self.state.pointer += 1;
            }
            None => {
                let pos = self.todo.pop().expect("polled a read");
                if !empty {
                    self.replacing = Some(pos);
                }
            }
        }
    }
}

/// How a candidate confirmed unique in `W` is checked before use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confirm {
    /// Read the dedicated register; use the index only if it is empty.
    Register,
    /// Read every other process's availability board; commit only if all
    /// of them consider the integer available, then publish the new state.
    Boards,
}

#[derive(Clone, Debug)]
enum Phase {
    Propose(u64),
    Scan(u64),
    ReadRegister(u64),
    Verify(VerifyList),
    /// Reading board `q`; the `k`-th read of a board is register
    /// [`board_read_order`]`(k)`.
    ReadBoards {
        x: u64,
        boards: Vec<Vec<Value>>,
        q: usize,
        k: usize,
    },
    /// Board writes still to do; then propose afresh, or finish with `x`.
    Publish {
        writes: Vec<(usize, u64)>,
        then: Option<u64>,
    },
    Done(u64),
}

/// Acquiring a new name through the snapshot object `W`: propose the
/// smallest entry (or one chosen by rank after a collision), scan, and
/// confirm a unique proposal. Outputs the name and the updated state.
#[derive(Clone, Debug)]
pub struct Acquire {
    me: Slot,
    layout: RepoLayout,
    confirm: Confirm,
    state: LocalNamingState,
    phase: Phase,
}

impl Acquire {
    pub fn new(me: Slot, layout: RepoLayout, confirm: Confirm, state: LocalNamingState) -> Self {
        let first = state.smallest();
        Self {
            me,
            layout,
            confirm,
            state,
            phase: Phase::Propose(first),
        }
    }

    fn others(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.layout.n).filter(move |&q| q != self.me.index())
    }

    /// Room for every board, with the first one to read sized.
    fn blank_boards(&self, first: usize) -> Vec<Vec<Value>> {
        let mut boards = vec![Vec::new(); self.layout.n];
        boards[first] = vec![Value::Null; self.layout.board_len()];
        boards
    }

    fn next_board(&self, from: usize) -> Option<usize> {
        self.others().find(|&q| q >= from)
    }

    /// Drop entries some board rules out and refill from the pointer with
    /// integers every board allows.
    fn prune(&mut self, boards: &[Vec<Value>]) -> Vec<(usize, u64)> {
        let before = self.state.clone();
        let ok = |x: u64| boards.iter().all(|b| b.is_empty() || board_allows(b, x));
        for pos in 0..self.state.entries.len() {
            if !ok(self.state.entries[pos]) {
                while !ok(self.state.pointer) {
                    self.state.pointer += 1;
                }
                self.state.entries[pos] = self.state.pointer;
                self.state.pointer += 1;
            }
        }
        self.state.board_writes(&before, &self.layout)
    }

    fn commit(&mut self, x: u64) -> Vec<(usize, u64)> {
        let before = self.state.clone();
        let pos = self.state.position(x).expect("committed names come from the list");
        self.state.entries[pos] = self.state.pointer;
        self.state.pointer += 1;
        self.state.board_writes(&before, &self.layout)
    }
}

impl Routine for Acquire {
    type Output = (u64, LocalNamingState);

    fn poll(&mut self) -> Poll<Self::Output> {
        loop {
            let op = match &mut self.phase {
                Phase::Propose(x) => Op::Update(self.layout.w, Value::Int(*x)),
                Phase::Scan(_) => Op::Scan(self.layout.w),
                Phase::ReadRegister(x) => Op::Read(self.layout.dedicated(*x)),
                Phase::Verify(v) => {
                    let state = crate::ready!(v.poll());
                    self.phase = Phase::Propose(state.smallest());
                    self.state = state;
                    continue;
                }
                Phase::ReadBoards { q, k, .. } => Op::Read(
                    self.layout
                        .board(Slot::from_index(*q), board_read_order(self.layout.board_len(), *k)),
                ),
                Phase::Publish { writes, then } => match writes.first() {
                    Some(&(idx, v)) => Op::Write(self.layout.board(self.me, idx), Value::Int(v)),
                    None => {
                        self.phase = match *then {
                            Some(x) => Phase::Done(x),
                            None => Phase::Propose(self.state.smallest()),
                        };
                        continue;
                    }
                },
                Phase::Done(x) => return Poll::Ready((*x, self.state.clone())),
            };
            return Poll::Op(op);
        }
    }

    fn resume(&mut self, response: Response) {
        let phase = std::mem::replace(&mut self.phase, Phase::Done(0));
        self.phase = match phase {
            Phase::Propose(x) => Phase::Scan(x),
            Phase::Scan(x) => {
                let view = response.into_view();
                let unique = view
                    .iter()
                    .enumerate()
                    .all(|(q, v)| q == self.me.index() || v.as_int() != Some(x));
                if !unique {
                    match choose_by_rank(self.me, &view, &self.state.list()) {
                        Some(y) => Phase::Propose(y),
                        None => unreachable!("a list of 2n - 1 entries always leaves a choice"),
                    }
                } else {
                    match self.confirm {
                        Confirm::Register => Phase::ReadRegister(x),
                        Confirm::Boards => match self.next_board(0) {
                            Some(q) => Phase::ReadBoards {
                                x,
                                boards: self.blank_boards(q),
                                q,
                                k: 0,
                            },
                            None => Phase::Publish {
                                writes: self.commit(x),
                                then: Some(x),
                            },
                        },
                    }
                }
            }
            Phase::ReadRegister(x) => {
                if response.value().is_null() {
                    Phase::Done(x)
                } else {
                    Phase::Verify(VerifyList::new(self.layout, self.state.clone()))
                }
            }
            Phase::Verify(mut v) => {
                v.resume(response);
                Phase::Verify(v)
            }
            Phase::ReadBoards { x, mut boards, q, k } => {
                let len = self.layout.board_len();
                boards[q][board_read_order(len, k)] = response.value();
                if k + 1 < len {
                    Phase::ReadBoards { x, boards, q, k: k + 1 }
                } else if let Some(next) = self.next_board(q + 1) {
                    boards[next] = vec![Value::Null; len];
                    Phase::ReadBoards {
                        x,
                        boards,
                        q: next,
                        k: 0,
                    }
                } else if boards.iter().all(|b| b.is_empty() || board_allows(b, x)) {
                    Phase::Publish {
                        writes: self.commit(x),
                        then: Some(x),
                    }
                } else {
                    Phase::Publish {
                        writes: self.prune(&boards),
                        then: None,
                    }
                }
            }
            Phase::Publish { mut writes, then } => {
                writes.remove(0);
                Phase::Publish { writes, then }
            }
            Phase::Done(_) => unreachable!("resumed a finished acquisition"),
        };
    }
}
