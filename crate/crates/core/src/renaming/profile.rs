use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::RenamingError;
use crate::expander::{build_lossless_expander, BipartiteGraph, Constants, ExpanderParams, VerifyMode};

/// Expander constants plus the knobs used to build and certify graphs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub constants: Constants,
    /// Base seed for graph construction.
    pub graph_seed: u64,
    pub max_attempts: u32,
    /// Trials for sampled certification, used when exact certification
    /// would visit more subsets than the default cap.
    pub sampled_trials: u64,
}

impl Profile {
    pub fn scaled() -> Self {
        Self {
            constants: Constants::scaled(),
            graph_seed: 0x5eed,
            max_attempts: 400,
            sampled_trials: 20_000,
        }
    }

    pub fn paper() -> Self {
        Self {
            constants: Constants::paper(),
            ..Self::scaled()
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "scaled" => Some(Self::scaled()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn params(&self, v_size: usize, l: usize) -> Result<ExpanderParams, RenamingError> {
        Ok(ExpanderParams::from_constants(v_size, l, self.constants)?)
    }

    /// Certified `(l, Δ, 1/4)` expander on `v_size` inputs. Graphs are cached
    /// process-wide; the construction seed depends only on the profile and
    /// the parameters, so the result does not depend on call order.
    pub fn graph(&self, v_size: usize, l: usize) -> Result<Arc<BipartiteGraph>, RenamingError> {
        let params = self.params(v_size, l)?;
        let seed = mix(&[
            self.graph_seed,
            params.v_size as u64,
            params.l as u64,
            params.delta as u64,
            params.w_size as u64,
        ]);
        let key = GraphKey {
            params: [params.v_size, params.l, params.delta, params.w_size],
            seed,
            attempts: self.max_attempts,
            trials: self.sampled_trials,
        };
        let cache = GRAPHS.get_or_init(Default::default);
        if let Some(g) = cache.lock().expect("graph cache poisoned").get(&key) {
            return Ok(Arc::clone(g));
        }
        let mode = VerifyMode::auto(params.v_size, params.l, self.sampled_trials, seed ^ 0xa5a5);
        let g = Arc::new(build_lossless_expander(&params, seed, self.max_attempts, mode)?);
        cache.lock().expect("graph cache poisoned").insert(key, Arc::clone(&g));
        Ok(g)
    }
}

impl Default for Profile {
    fn default() -> Self {
        Self::scaled()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct GraphKey {
    params: [usize; 4],
    seed: u64,
    attempts: u32,
    trials: u64,
}

static GRAPHS: OnceLock<Mutex<HashMap<GraphKey, Arc<BipartiteGraph>>>> = OnceLock::new();

/// splitmix64 over a word sequence.
pub(crate) fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &w in words {
        h = h.wrapping_add(w).wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}
