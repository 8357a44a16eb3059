//! Lossless bipartite expanders: random construction, certification, and
//! unique-neighbor matchings.

mod graph;
mod params;
mod verify;

pub use graph::{unique_neighbor_count, unique_neighbor_matching, BipartiteGraph};
pub use params::{lg_ratio, quarter, Constants, Epsilon, ExpanderParams};
pub use verify::{
    build_lossless_expander, expands, for_each_subset, subsets_up_to, verify_expansion, SubsetStats, Verdict,
    VerifyMode, DEFAULT_EXACT_CAP,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpanderError {
    #[error("invalid expander parameters: {0}")]
    InvalidParams(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("no candidate graph verified in {attempts} attempts")]
    ConstructionFailed { attempts: u32 },
    #[error("exact verification needs {subsets} subsets, cap is {cap}")]
    SizeExceeded { subsets: u128, cap: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
