use serde::{Deserialize, Serialize};
use std::fmt;

use crate::simcore::{RegisterId, SnapshotId};

/// Inclusive interval of names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NameRange {
    pub lo: u64,
    pub hi: u64,
}

impl NameRange {
    pub fn new(lo: u64, hi: u64) -> Self {
        assert!(lo <= hi, "empty name range [{lo}, {hi}]");
        Self { lo, hi }
    }

    /// `[start, start + len - 1]`.
    pub fn starting_at(start: u64, len: u64) -> Self {
        Self::new(start, start + len - 1)
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, name: u64) -> bool {
        (self.lo..=self.hi).contains(&name)
    }

    pub fn overlaps(&self, other: &NameRange) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

impl fmt::Display for NameRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// One labelled block of registers handed out by a [`RegisterAllocator`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Bump allocator over register indices and snapshot objects. Keeps the
/// labelled blocks so layouts can be audited.
#[derive(Clone, Debug, Default)]
pub struct RegisterAllocator {
    next: usize,
    snapshots: usize,
    blocks: Vec<Block>,
}

impl RegisterAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, label: impl Into<String>, len: usize) -> RegisterId {
        let start = self.next;
        self.next += len;
        self.blocks.push(Block {
            label: label.into(),
            start,
            len,
        });
        RegisterId(start)
    }

    pub fn snapshot(&mut self) -> SnapshotId {
        self.snapshots += 1;
        SnapshotId(self.snapshots - 1)
    }

    pub fn registers(&self) -> usize {
        self.next
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }
}

/// Pairs of overlapping blocks, by index. Empty for any layout produced by
/// a single allocator; used to check layouts assembled by hand.
pub fn overlapping_blocks(blocks: &[Block]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..blocks.len()).filter(|&i| blocks[i].len > 0).collect();
    order.sort_by_key(|&i| blocks[i].start);
    let mut out = Vec::new();
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            if blocks[j].start >= blocks[i].end() {
                break;
            }
            out.push((i.min(j), i.max(j)));
        }
    }
    out
}

/// Pairs of overlapping name ranges, by index.
pub fn overlapping_ranges(ranges: &[NameRange]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..ranges.len() {
        for j in i + 1..ranges.len() {
            if ranges[i].overlaps(&ranges[j]) {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocator_blocks_are_disjoint() {
        let mut a = RegisterAllocator::new();
        a.alloc("x", 4);
        a.alloc("empty", 0);
        a.alloc("y", 3);
        assert_eq!(a.registers(), 7);
        assert!(overlapping_blocks(a.blocks()).is_empty());
    }

    #[test]
    fn detects_overlaps() {
        let blocks = vec![
            Block {
                label: "a".into(),
                start: 0,
                len: 4,
            },
            Block {
                label: "b".into(),
                start: 3,
                len: 2,
            },
        ];
        assert_eq!(overlapping_blocks(&blocks), vec![(0, 1)]);
        let r = [NameRange::new(1, 3), NameRange::new(4, 4), NameRange::new(3, 9)];
        assert_eq!(overlapping_ranges(&r), vec![(0, 2), (1, 2)]);
    }
}
