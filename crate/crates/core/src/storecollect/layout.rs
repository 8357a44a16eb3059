use serde::{Deserialize, Serialize};

use crate::simcore::RegisterId;

/// Registers for store&collect: interval `i` has `2^(i+1)` registers and is
/// preceded by its control flag, so the layout reads
/// `[c0, r1, r2, c1, r3, …, r6, c2, r7, …]`. Name `x` lives in interval
/// `floor(lg(x + 1)) - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectLayout {
    pub base: RegisterId,
    pub intervals: u32,
}

impl CollectLayout {
    /// Enough intervals to hold names `1..=names`.
    pub fn for_names(base: RegisterId, names: u64) -> Self {
        let mut intervals = 1;
        while Self::last_name(intervals) < names {
            intervals += 1;
        }
        Self { base, intervals }
    }

    /// Largest name held by the first `intervals` intervals.
    fn last_name(intervals: u32) -> u64 {
        (1u64 << (intervals + 1)) - 2
    }

    pub fn interval_len(i: u32) -> u64 {
        1 << (i + 1)
    }

    /// Registers used, control flags included.
    pub fn len(&self) -> usize {
        (0..self.intervals).map(|i| 1 + Self::interval_len(i) as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn capacity(&self) -> u64 {
        Self::last_name(self.intervals)
    }

    fn offset_of_interval(i: u32) -> usize {
        // Σ_{j<i} (1 + 2^{j+1}) = i + 2^{i+1} - 2
        i as usize + (1usize << (i + 1)) - 2
    }

    pub fn control(&self, i: u32) -> RegisterId {
        self.base.offset(Self::offset_of_interval(i))
    }

    /// The `pos`-th register (0-based) of interval `i`.
    pub fn slot(&self, i: u32, pos: u64) -> RegisterId {
        self.base.offset(Self::offset_of_interval(i) + 1 + pos as usize)
    }

    pub fn interval_of(name: u64) -> u32 {
        assert!(name >= 1, "names start at 1");
        (name + 1).ilog2() - 1
    }

    pub fn register_of(&self, name: u64) -> RegisterId {
        let i = Self::interval_of(name);
        assert!(
            i < self.intervals,
            "name {name} beyond layout capacity {}",
            self.capacity()
        );
        self.slot(i, name - ((1 << (i + 1)) - 1))
    }

    /// Reads a collect performs when intervals `0..used` have their flag set
    /// and the rest do not: each used interval costs its flag plus its
    /// registers, and one more flag read finds the first zero unless the
    /// layout is exhausted.
    pub fn collect_reads(&self, used: u32) -> u64 {
        let full: u64 = (0..used).map(|i| 1 + Self::interval_len(i)).sum();
        full + u64::from(used < self.intervals)
    }
}
