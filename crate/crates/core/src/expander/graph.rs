use rand::seq::index;
use rand::Rng;
use std::fmt::Write as _;

use super::{ExpanderError, ExpanderParams};

/// Bipartite graph with a fixed input degree. Neighbor lists are stored in
/// sampling order, which is the order Majority tries them in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    v_size: usize,
    w_size: usize,
    delta: usize,
    /// The subset-size bound the graph was built (and certified) for.
    l: usize,
    adjacency: Vec<u32>,
}

impl BipartiteGraph {
    /// Build from explicit neighbor lists. Every list must have exactly
    /// `delta` distinct entries below `w_size`.
    pub fn from_lists(w_size: usize, l: usize, lists: &[Vec<u32>]) -> Result<Self, ExpanderError> {
        let delta = lists.first().map_or(0, Vec::len);
        let mut adjacency = Vec::with_capacity(lists.len() * delta);
        for (v, list) in lists.iter().enumerate() {
            if list.len() != delta {
                return Err(ExpanderError::InvalidGraph(format!(
                    "input {v} has {} neighbors, expected {delta}",
                    list.len()
                )));
            }
            let mut seen = list.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != delta {
                return Err(ExpanderError::InvalidGraph(format!("input {v} has repeated neighbors")));
            }
            if let Some(&bad) = list.iter().find(|&&w| w as usize >= w_size) {
                return Err(ExpanderError::InvalidGraph(format!(
                    "input {v} has neighbor {bad} outside [0, {w_size})"
                )));
            }
            adjacency.extend_from_slice(list);
        }
        Ok(Self {
            v_size: lists.len(),
            w_size,
            delta,
            l,
            adjacency,
        })
    }

    /// Every input picks `delta` distinct outputs uniformly at random.
    pub fn random<R: Rng + ?Sized>(params: &ExpanderParams, rng: &mut R) -> Self {
        let mut adjacency = Vec::with_capacity(params.v_size * params.delta);
        for _ in 0..params.v_size {
            adjacency.extend(
                index::sample(rng, params.w_size, params.delta)
                    .into_iter()
                    .map(|w| w as u32),
            );
        }
        Self {
            v_size: params.v_size,
            w_size: params.w_size,
            delta: params.delta,
            l: params.l,
            adjacency,
        }
    }

    /// Redraw the neighbor list of input `v`.
    pub(crate) fn resample<R: Rng + ?Sized>(&mut self, v: usize, rng: &mut R) {
        let d = self.delta;
        for (slot, w) in self.adjacency[v * d..(v + 1) * d]
            .iter_mut()
            .zip(index::sample(rng, self.w_size, d))
        {
            *slot = w as u32;
        }
    }

    pub fn v_size(&self) -> usize {
        self.v_size
    }

    pub fn w_size(&self) -> usize {
        self.w_size
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v * self.delta..(v + 1) * self.delta]
    }

    /// Text form: header `EXP v_size w_size delta L`, then one line of
    /// space-separated neighbor indices per input.
    pub fn to_text(&self) -> String {
        let mut s = format!("EXP {} {} {} {}\n", self.v_size, self.w_size, self.delta, self.l);
        for v in 0..self.v_size {
            let mut first = true;
            for w in self.neighbors(v) {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{w}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ExpanderError> {
        let parse_err = |line: usize, message: String| ExpanderError::Parse { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "EXP" {
            return Err(parse_err(
                hl + 1,
                format!("expected `EXP v_size w_size delta L`, got `{header}`"),
            ));
        }
        let num = |i: usize| -> Result<usize, ExpanderError> {
            fields[i]
                .parse()
                .map_err(|_| parse_err(hl + 1, format!("bad number `{}`", fields[i])))
        };
        let (v_size, w_size, delta, l) = (num(1)?, num(2)?, num(3)?, num(4)?);
        let mut lists = Vec::with_capacity(v_size);
        for (i, line) in lines {
            let list = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|_| parse_err(i + 1, format!("bad index `{t}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if list.len() != delta {
                return Err(parse_err(
                    i + 1,
                    format!("expected {delta} neighbors, got {}", list.len()),
                ));
            }
            lists.push(list);
        }
        if lists.len() != v_size {
            return Err(parse_err(
                0,
                format!("expected {v_size} input lines, got {}", lists.len()),
            ));
        }
        if v_size == 0 {
            return Ok(Self {
                v_size,
                w_size,
                delta,
                l,
                adjacency: Vec::new(),
            });
        }
        Self::from_lists(w_size, l, &lists)
    }
}

/// Match inputs of `subset` to outputs adjacent to exactly one member of
/// `subset`. Each input takes its first such neighbor in list order; the
/// outputs are distinct by construction.
pub fn unique_neighbor_matching(g: &BipartiteGraph, subset: &[usize]) -> Vec<(usize, u32)> {
    let mut hits = std::collections::HashMap::<u32, u32>::new();
    for &v in subset {
        for &w in g.neighbors(v) {
            *hits.entry(w).or_default() += 1;
        }
    }
    subset
        .iter()
        .filter_map(|&v| g.neighbors(v).iter().find(|w| hits[w] == 1).map(|&w| (v, w)))
        .collect()
}

/// Number of outputs adjacent to exactly one member of `subset`.
pub fn unique_neighbor_count(g: &BipartiteGraph, subset: &[usize]) -> usize {
    let mut hits = std::collections::HashMap::<u32, u32>::new();
    for &v in subset {
        for &w in g.neighbors(v) {
            *hits.entry(w).or_default() += 1;
        }
    }
    hits.values().filter(|&&c| c == 1).count()
}
