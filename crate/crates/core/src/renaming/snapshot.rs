use crate::simcore::{Op, Poll, Response, Routine, SnapshotId, Value};

/// Snapshot-based renaming into `[1, names]`. With `m` participants the
/// decided names stay within `[1, 2m - 1]`, so `names = 2k - 1` suffices
/// for up to `k` participants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapshotPlan {
    pub snapshot: SnapshotId,
    pub names: u64,
}

impl SnapshotPlan {
    pub fn for_contention(snapshot: SnapshotId, k: u64) -> Self {
        Self {
            snapshot,
            names: 2 * k - 1,
        }
    }

    /// Steps a process needs once every other participant has stopped
    /// taking steps: finish a pending update, scan, re-propose, scan.
    pub const SOLO_SUFFIX_STEPS: u64 = 4;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pc {
    Update,
    Scan,
    Done(Option<u64>),
}

/// Segment content is `Pair(id, proposal)`, proposal 0 meaning none yet.
/// After each scan: decide if the proposal is nonzero and no other segment
/// holds it; otherwise propose the `r`-th smallest name not proposed by
/// others, `r` being the rank of `id` among the scanned ids. A proposal
/// beyond `names` means more participants than the plan admits, and the
/// routine gives up without a name.
#[derive(Clone, Debug)]
pub struct SnapshotRename {
    plan: SnapshotPlan,
    id: u64,
    proposal: u64,
    pc: Pc,
}

impl SnapshotRename {
    pub fn new(plan: SnapshotPlan, id: u64) -> Self {
        Self {
            plan,
            id,
            proposal: 0,
            pc: Pc::Update,
        }
    }
}

impl Routine for SnapshotRename {
    type Output = Option<u64>;

    fn poll(&mut self) -> Poll<Option<u64>> {
        Poll::Op(match self.pc {
            Pc::Update => Op::Update(self.plan.snapshot, Value::Pair(self.id, self.proposal)),
            Pc::Scan => Op::Scan(self.plan.snapshot),
            Pc::Done(out) => return Poll::Ready(out),
        })
    }

    fn resume(&mut self, response: Response) {
        self.pc = match self.pc {
            Pc::Update => Pc::Scan,
            Pc::Scan => {
                let view = response.into_view();
                let mut ids = Vec::new();
                let mut taken = Vec::new();
                for (id, prop) in view.iter().filter_map(Value::as_pair) {
                    ids.push(id);
                    if id != self.id && prop != 0 {
                        taken.push(prop);
                    }
                }
                if self.proposal != 0 && !taken.contains(&self.proposal) {
                    Pc::Done(Some(self.proposal))
                } else {
                    let rank = ids.iter().filter(|&&i| i < self.id).count() + 1;
                    let pick = (1..).filter(|x| !taken.contains(x)).nth(rank - 1).expect("unbounded");
                    if pick > self.plan.names {
                        Pc::Done(None)
                    } else {
                        self.proposal = pick;
                        Pc::Update
                    }
                }
            }
            Pc::Done(_) => unreachable!("resumed a finished snapshot renaming"),
        };
    }
}
