//! Registers and atomic snapshot objects.

use serde::{Deserialize, Serialize};
use std::fmt;

use super::SimError;

/// Dense address of a read-write register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterId(pub usize);

impl RegisterId {
    pub fn offset(self, by: usize) -> RegisterId {
        RegisterId(self.0 + by)
    }
}

impl fmt::Display for RegisterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Index of a snapshot object inside a [`SharedMemory`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnapshotId(pub usize);

/// 1-based system slot of a process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Slot(pub u32);

impl Slot {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Slot {
        Slot(i as u32 + 1)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A process: its original name (from `[N]`) and the slot it runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcessId {
    pub original: u64,
    pub slot: Slot,
}

impl ProcessId {
    pub fn new(original: u64, slot: Slot) -> Self {
        Self { original, slot }
    }
}

/// Contents of a register or snapshot segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    #[default]
    Null,
    Pid(u64),
    Int(u64),
    Pair(u64, u64),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_int(&self) -> Option<u64> {
        match *self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(u64, u64)> {
        match *self {
            Value::Pair(a, b) => Some((a, b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Pid(p) => write!(f, "pid:{p}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

/// Registers plus snapshot objects; the only channel between processes.
///
/// Registers `0..declared` always exist. When `unbounded_tail` is set, every
/// index at or above `declared` is also a valid register, materialized on its
/// first write and `Null` until then.
#[derive(Clone, Debug)]
pub struct SharedMemory {
    registers: Vec<Value>,
    declared: usize,
    unbounded_tail: bool,
    snapshots: Vec<Vec<Value>>,
    processes: usize,
}

impl SharedMemory {
    /// `register_count` Null registers and one snapshot object with `n` segments.
    pub fn new(register_count: usize, n: usize) -> Self {
        Self::with_snapshots(register_count, n, 1)
    }

    pub fn with_snapshots(register_count: usize, n: usize, snapshots: usize) -> Self {
        Self {
            registers: vec![Value::Null; register_count],
            declared: register_count,
            unbounded_tail: false,
            snapshots: vec![vec![Value::Null; n]; snapshots],
            processes: n,
        }
    }

    /// Allow addresses past the declared registers (lazily materialized).
    pub fn with_unbounded_tail(mut self) -> Self {
        self.unbounded_tail = true;
        self
    }

    pub fn register_count(&self) -> usize {
        self.declared
    }

    pub fn processes(&self) -> usize {
        self.processes
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }

    /// Highest materialized register index plus one.
    pub fn materialized(&self) -> usize {
        self.registers.len()
    }

    fn check(&self, reg: RegisterId) -> Result<(), SimError> {
        if reg.0 < self.declared || self.unbounded_tail {
            Ok(())
        } else {
            Err(SimError::BadRegister(reg))
        }
    }

    pub fn read(&self, reg: RegisterId) -> Result<Value, SimError> {
        self.check(reg)?;
        Ok(self.registers.get(reg.0).copied().unwrap_or_default())
    }

    pub fn write(&mut self, reg: RegisterId, value: Value) -> Result<(), SimError> {
        self.check(reg)?;
        if reg.0 >= self.registers.len() {
            self.registers.resize(reg.0 + 1, Value::Null);
        }
        self.registers[reg.0] = value;
        Ok(())
    }

    pub fn update(&mut self, snap: SnapshotId, slot: Slot, value: Value) -> Result<(), SimError> {
        let segments = self.snapshots.get_mut(snap.0).ok_or(SimError::BadSnapshot(snap))?;
        let cell = segments.get_mut(slot.index()).ok_or(SimError::UnknownSlot(slot))?;
        *cell = value;
        Ok(())
    }

    pub fn scan(&self, snap: SnapshotId) -> Result<Vec<Value>, SimError> {
        self.snapshots.get(snap.0).cloned().ok_or(SimError::BadSnapshot(snap))
    }

    /// Direct view of the register array, for post-run inspection.
    pub fn registers(&self) -> &[Value] {
        &self.registers
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_memory_has_only_the_snapshot() {
        let m = SharedMemory::new(0, 1);
        assert_eq!(m.register_count(), 0);
        assert_eq!(m.scan(SnapshotId(0)).unwrap(), vec![Value::Null]);
        assert!(matches!(m.read(RegisterId(0)), Err(SimError::BadRegister(_))));
    }

    #[test]
    fn fresh_registers_and_segments_are_null() {
        let m = SharedMemory::new(5, 2);
        for i in 0..5 {
            assert_eq!(m.read(RegisterId(i)).unwrap(), Value::Null);
        }
        assert_eq!(m.scan(SnapshotId(0)).unwrap(), vec![Value::Null; 2]);
    }

    #[test]
    fn lazy_tail_reads_null_and_grows_on_write() {
        let mut m = SharedMemory::new(2, 1).with_unbounded_tail();
        assert_eq!(m.read(RegisterId(1_000)).unwrap(), Value::Null);
        assert_eq!(m.materialized(), 2);
        m.write(RegisterId(10), Value::Int(3)).unwrap();
        assert_eq!(m.read(RegisterId(10)).unwrap(), Value::Int(3));
        assert_eq!(m.materialized(), 11);
    }

    #[test]
    fn update_touches_only_own_segment() {
        let mut m = SharedMemory::with_snapshots(0, 3, 2);
        m.update(SnapshotId(1), Slot(2), Value::Int(9)).unwrap();
        assert_eq!(
            m.scan(SnapshotId(1)).unwrap(),
            vec![Value::Null, Value::Int(9), Value::Null]
        );
        assert_eq!(m.scan(SnapshotId(0)).unwrap(), vec![Value::Null; 3]);
        assert!(m.update(SnapshotId(0), Slot(4), Value::Null).is_err());
    }
}
