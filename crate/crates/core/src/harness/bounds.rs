//! Step-bound formulas and their comparison with measurements.

use serde::{Deserialize, Serialize};

use crate::renaming::Algorithm;

/// `lg x`, floored at 1 so products of logarithms stay positive.
fn lg(x: f64) -> f64 {
    x.log2().max(1.0)
}

/// The asymptotic local-step bound of an algorithm with unit constant.
/// Measured steps divided by this value give the algorithm's constant.
pub fn declared_steps(algo: Algorithm, k: u64, n_names: u64) -> f64 {
    let (k, n) = (k as f64, n_names as f64);
    let polylog = lg(k) * (lg(n) + lg(k) * lg(lg(n)));
    match algo {
        Algorithm::Compete => 1.0,
        Algorithm::Majority => lg(n),
        Algorithm::Basic => lg(k) * lg(n),
        Algorithm::Polylog => polylog,
        Algorithm::AlmostAdaptive => lg(k) * polylog,
        Algorithm::Ma | Algorithm::Snapshot | Algorithm::Efficient | Algorithm::Adaptive => k,
    }
}

/// Worst-case steps any wait-free `(k, N)`-renaming algorithm into `[M]`
/// with `r` registers must take: `1 + min{k - 2, log_{2r}(N / 2M)}`, with
/// the stage count clamped at 0.
pub fn renaming_lower_bound(k: u64, n_names: u64, m: u64, r: usize) -> f64 {
    let stages = (n_names as f64 / (2.0 * m as f64)).ln() / (2.0 * r.max(1) as f64).ln();
    1.0 + (k as f64 - 2.0).min(stages).max(0.0)
}

/// Measurements of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub algo: Algorithm,
    pub k: u64,
    #[serde(rename = "N")]
    pub n_names: u64,
    pub runs: u64,
    pub max_steps: u64,
    pub max_name: u64,
    pub range_bound: u64,
    pub registers_used: usize,
    pub declared: f64,
    pub ratio: f64,
    pub lower_bound: f64,
}

impl BoundPoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        algo: Algorithm,
        k: u64,
        n_names: u64,
        runs: u64,
        max_steps: u64,
        max_name: u64,
        range_bound: u64,
        registers_used: usize,
    ) -> Self {
        let declared = declared_steps(algo, k, n_names);
        Self {
            algo,
            k,
            n_names,
            runs,
            max_steps,
            max_name,
            range_bound,
            registers_used,
            declared,
            ratio: max_steps as f64 / declared,
            lower_bound: renaming_lower_bound(k, n_names, range_bound, registers_used),
        }
    }
}

/// Smallest `C` with `max_steps <= C · declared` at every point.
pub fn fitted_constant(points: &[BoundPoint]) -> f64 {
    points.iter().map(|p| p.ratio).fold(0.0, f64::max)
}

/// Relative spread `|a - b| / max(a, b)` of two fitted constants.
pub fn relative_spread(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == 0.0 {
        0.0
    } else {
        (a - b).abs() / hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_takes_the_smaller_term() {
        // N / 2M = 64 and 2r = 4: three stages, capped by k - 2.
        assert!((renaming_lower_bound(10, 1280, 10, 2) - 4.0).abs() < 1e-9);
        assert!((renaming_lower_bound(3, 1280, 10, 2) - 2.0).abs() < 1e-9);
        // N below 2M: no stage.
        assert_eq!(renaming_lower_bound(5, 10, 10, 2), 1.0);
        assert_eq!(renaming_lower_bound(1, 1 << 20, 1, 2), 1.0);
    }

    #[test]
    fn fitted_constant_is_the_largest_ratio() {
        let pts = [
            BoundPoint::new(Algorithm::Ma, 2, 8, 1, 6, 3, 3, 6),
            BoundPoint::new(Algorithm::Ma, 4, 8, 1, 10, 10, 10, 20),
        ];
        assert_eq!(pts[0].declared, 2.0);
        assert_eq!(fitted_constant(&pts), 3.0);
        assert!((relative_spread(3.0, 2.4) - 0.2).abs() < 1e-12);
    }
}
