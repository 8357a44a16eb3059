use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BipartiteGraph, Epsilon, ExpanderError, ExpanderParams};

/// Default ceiling on the number of subsets exact verification will visit.
pub const DEFAULT_EXACT_CAP: u64 = 60_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Every subset of size at most `L`, refused above `cap` subsets.
    Exact { cap: u64 },
    /// `trials` subsets: size uniform in `1..=L`, then a uniform subset.
    Sampled { trials: u64, seed: u64 },
}

impl VerifyMode {
    pub fn exact() -> Self {
        VerifyMode::Exact { cap: DEFAULT_EXACT_CAP }
    }

    /// Exact when the subset count fits under the default cap, else sampled.
    pub fn auto(v_size: usize, l: usize, trials: u64, seed: u64) -> Self {
        if subsets_up_to(v_size, l) <= DEFAULT_EXACT_CAP as u128 {
            Self::exact()
        } else {
            VerifyMode::Sampled { trials, seed }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass {
        subsets_checked: u64,
        /// True for a sampled pass: absence of a violation among the trials,
        /// not a proof.
        statistical: bool,
    },
    Fail {
        witness: Vec<usize>,
        neighbors: usize,
    },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

/// `Σ_{x=1..=l} C(v, x)`, saturating.
pub fn subsets_up_to(v: usize, l: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for x in 1..=l.min(v) {
        c = c.saturating_mul((v - x + 1) as u128) / x as u128;
        total = total.saturating_add(c);
    }
    total
}

/// `|N(X)| > (1 - ε)·|X|·Δ`, in integers.
pub fn expands(neighbors: usize, size: usize, delta: usize, eps: Epsilon) -> bool {
    let (num, den) = (*eps.numer() as u128, *eps.denom() as u128);
    neighbors as u128 * den > (den - num) * size as u128 * delta as u128
}

/// Incremental neighbor counts for a growing and shrinking subset.
struct Cover {
    hits: Vec<u32>,
    distinct: usize,
    unique: usize,
}

impl Cover {
    fn new(w: usize) -> Self {
        Self {
            hits: vec![0; w],
            distinct: 0,
            unique: 0,
        }
    }

    fn add(&mut self, ns: &[u32]) {
        for &w in ns {
            let h = &mut self.hits[w as usize];
            match *h {
                0 => {
                    self.distinct += 1;
                    self.unique += 1;
                }
                1 => self.unique -= 1,
                _ => {}
            }
            *h += 1;
        }
    }

    fn remove(&mut self, ns: &[u32]) {
        for &w in ns {
            let h = &mut self.hits[w as usize];
            *h -= 1;
            match *h {
                0 => {
                    self.distinct -= 1;
                    self.unique -= 1;
                }
                1 => self.unique += 1,
                _ => {}
            }
        }
    }
}

/// Neighbor statistics of one subset handed to an enumeration visitor.
#[derive(Clone, Copy, Debug)]
pub struct SubsetStats {
    pub size: usize,
    pub neighbors: usize,
    pub unique_neighbors: usize,
}

/// Visit every nonempty subset of size at most `l` in lexicographic order
/// until `visit` returns false. Returns the number of subsets visited.
pub fn for_each_subset<F>(g: &BipartiteGraph, l: usize, mut visit: F) -> u64
where
    F: FnMut(&[usize], SubsetStats) -> bool,
{
    let mut cover = Cover::new(g.w_size());
    let mut stack = Vec::with_capacity(l);
    let mut count = 0;
    descend(g, l, 0, &mut stack, &mut cover, &mut count, &mut visit);
    count
}

fn descend<F>(
    g: &BipartiteGraph,
    l: usize,
    from: usize,
    stack: &mut Vec<usize>,
    cover: &mut Cover,
    count: &mut u64,
    visit: &mut F,
) -> bool
where
    F: FnMut(&[usize], SubsetStats) -> bool,
{
    if stack.len() == l {
        return true;
    }
    for v in from..g.v_size() {
        let ns = g.neighbors(v);
        cover.add(ns);
        stack.push(v);
        *count += 1;
        let stats = SubsetStats {
            size: stack.len(),
            neighbors: cover.distinct,
            unique_neighbors: cover.unique,
        };
        let go_on = visit(stack, stats) && descend(g, l, v + 1, stack, cover, count, visit);
        stack.pop();
        cover.remove(ns);
        if !go_on {
            return false;
        }
    }
    true
}

/// Check the lossless-expansion condition for every `X` with `|X| <= l`
/// (exact) or for sampled subsets.
pub fn verify_expansion(
    g: &BipartiteGraph,
    l: usize,
    eps: Epsilon,
    mode: VerifyMode,
) -> Result<Verdict, ExpanderError> {
    let l = l.min(g.v_size());
    match mode {
        VerifyMode::Exact { cap } => {
            let subsets = subsets_up_to(g.v_size(), l);
            if subsets > cap as u128 {
                return Err(ExpanderError::SizeExceeded { subsets, cap });
            }
            let mut witness = None;
            let checked = for_each_subset(g, l, |x, s| {
                if expands(s.neighbors, s.size, g.delta(), eps) {
                    true
                } else {
                    witness = Some((x.to_vec(), s.neighbors));
                    false
                }
            });
            Ok(match witness {
                Some((witness, neighbors)) => Verdict::Fail { witness, neighbors },
                None => Verdict::Pass {
                    subsets_checked: checked,
                    statistical: false,
                },
            })
        }
        VerifyMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cover = Cover::new(g.w_size());
            for _ in 0..trials {
                let size = rng.gen_range(1..=l.max(1));
                let mut x: Vec<usize> = index::sample(&mut rng, g.v_size(), size).into_vec();
                x.sort_unstable();
                for &v in &x {
                    cover.add(g.neighbors(v));
                }
                let neighbors = cover.distinct;
                for &v in &x {
                    cover.remove(g.neighbors(v));
                }
                if !expands(neighbors, size, g.delta(), eps) {
                    return Ok(Verdict::Fail { witness: x, neighbors });
                }
            }
            Ok(Verdict::Pass {
                subsets_checked: trials,
                statistical: true,
            })
        }
    }
}

/// Subsets violating expansion: all of them in exact mode, the violating
/// draws in sampled mode.
fn violations(g: &BipartiteGraph, l: usize, eps: Epsilon, mode: VerifyMode) -> Result<Vec<Vec<usize>>, ExpanderError> {
    let l = l.min(g.v_size());
    let mut bad = Vec::new();
    match mode {
        VerifyMode::Exact { cap } => {
            let subsets = subsets_up_to(g.v_size(), l);
            if subsets > cap as u128 {
                return Err(ExpanderError::SizeExceeded { subsets, cap });
            }
            for_each_subset(g, l, |x, s| {
                if !expands(s.neighbors, s.size, g.delta(), eps) {
                    bad.push(x.to_vec());
                }
                true
            });
        }
        VerifyMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cover = Cover::new(g.w_size());
            for _ in 0..trials {
                let size = rng.gen_range(1..=l.max(1));
                let x: Vec<usize> = index::sample(&mut rng, g.v_size(), size).into_vec();
                for &v in &x {
                    cover.add(g.neighbors(v));
                }
                if !expands(cover.distinct, size, g.delta(), eps) {
                    bad.push(x.clone());
                }
                for &v in &x {
                    cover.remove(g.neighbors(v));
                }
            }
        }
    }
    Ok(bad)
}

/// Random construction with resampling: start from a graph whose inputs
/// each draw `Δ` distinct outputs uniformly, and while some subset fails to
/// expand, redraw the neighbor list of one random member of each failing
/// subset (skipping subsets that already contain a redrawn input). Every
/// round is one attempt; the returned graph has passed `mode`.
pub fn build_lossless_expander(
    params: &ExpanderParams,
    seed: u64,
    max_attempts: u32,
    mode: VerifyMode,
) -> Result<BipartiteGraph, ExpanderError> {
    params.validate()?;
    if max_attempts == 0 {
        return Err(ExpanderError::InvalidParams("max_attempts must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = BipartiteGraph::random(params, &mut rng);
    for _ in 0..max_attempts {
        let bad = violations(&g, params.l, params.epsilon, mode)?;
        if bad.is_empty() {
            return Ok(g);
        }
        let mut redraw = vec![false; g.v_size()];
        for x in &bad {
            if !x.iter().any(|&v| redraw[v]) {
                redraw[x[rng.gen_range(0..x.len())]] = true;
            }
        }
        for (v, _) in redraw.iter().enumerate().filter(|(_, r)| **r) {
            g.resample(v, &mut rng);
        }
    }
    Err(ExpanderError::ConstructionFailed { attempts: max_attempts })
}
