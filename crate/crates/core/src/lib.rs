//! Exclusive selection in asynchronous shared memory.
//!
//! Crash-prone processes communicate only through read-write registers (and
//! atomic snapshot objects). On top of a deterministic simulator this crate
//! implements wait-free renaming built from lossless expanders and splitter
//! grids, store&collect, and unbounded selection (repositories and
//! unbounded naming), together with trace invariant checkers and an
//! experiment harness.

pub mod expander;
pub mod harness;
pub mod renaming;
pub mod repository;
pub mod simcore;
pub mod storecollect;
