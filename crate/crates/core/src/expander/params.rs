use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::ExpanderError;

/// Loss parameter ε, kept exact so threshold comparisons have no rounding.
pub type Epsilon = Ratio<u64>;

/// The ε every renaming stage is certified at.
pub fn quarter() -> Epsilon {
    Ratio::new(1, 4)
}

/// Multipliers in `|W| = c_w · L · lg(|V|/L)` and `Δ = c_Δ · lg(|V|/L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c_w: f64,
    pub c_delta: f64,
}

impl Constants {
    /// `c_w = 12e⁴`, `c_Δ = 4`: the sizes for which random graphs are
    /// lossless expanders with positive probability.
    pub fn paper() -> Self {
        Self {
            c_w: 12.0 * std::f64::consts::E.powi(4),
            c_delta: 4.0,
        }
    }

    /// Desk-scale profile. Keeps the degree of the `paper` profile but uses a
    /// much smaller output side; graphs are certified before use.
    pub fn scaled() -> Self {
        Self {
            c_w: 64.0,
            c_delta: 4.0,
        }
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::scaled()
    }
}

/// `lg(v/L)`, floored at 1 so that degenerate ratios (`L` close to `v`)
/// still give every input at least `c_Δ` neighbors.
pub fn lg_ratio(v_size: usize, l: usize) -> f64 {
    (v_size as f64 / l as f64).log2().max(1.0)
}

/// Size parameters of a `(L, Δ, ε)`-lossless expander on `|V| = v_size`
/// inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpanderParams {
    pub v_size: usize,
    pub l: usize,
    pub delta: usize,
    pub w_size: usize,
    pub epsilon: Epsilon,
}

impl ExpanderParams {
    /// Derive `Δ` and `|W|` from the constants (both rounded up).
    pub fn from_constants(v_size: usize, l: usize, constants: Constants) -> Result<Self, ExpanderError> {
        if l == 0 || l > v_size {
            return Err(ExpanderError::InvalidParams(format!(
                "need 1 <= L <= |V|, got L={l}, |V|={v_size}"
            )));
        }
        let lg = lg_ratio(v_size, l);
        let delta = (constants.c_delta * lg).ceil() as usize;
        let w_size = (constants.c_w * l as f64 * lg).ceil() as usize;
        Self::explicit(v_size, l, delta.max(1), w_size, quarter())
    }

    pub fn explicit(
        v_size: usize,
        l: usize,
        delta: usize,
        w_size: usize,
        epsilon: Epsilon,
    ) -> Result<Self, ExpanderError> {
        let p = Self {
            v_size,
            l,
            delta,
            w_size,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ExpanderError> {
        let bad = |m: String| Err(ExpanderError::InvalidParams(m));
        if self.l == 0 || self.l > self.v_size {
            return bad(format!("need 1 <= L <= |V|, got L={}, |V|={}", self.l, self.v_size));
        }
        if self.delta == 0 || self.delta > self.w_size {
            return bad(format!(
                "need 1 <= delta <= |W|, got delta={}, |W|={}",
                self.delta, self.w_size
            ));
        }
        if self.w_size > u32::MAX as usize {
            return bad(format!("|W|={} does not fit output indices", self.w_size));
        }
        if *self.epsilon.numer() >= *self.epsilon.denom() {
            return bad(format!("epsilon must be below 1, got {}", self.epsilon));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_constants_at_1024_over_4() {
        let p = ExpanderParams::from_constants(1024, 4, Constants::paper()).unwrap();
        assert_eq!(p.delta, 32);
        // 12 e^4 * 4 * 8 = 20965.69...
        assert_eq!(p.w_size, 20966);
        assert_eq!(p.epsilon, quarter());
    }

    #[test]
    fn degenerate_ratio_is_floored() {
        let p = ExpanderParams::from_constants(3, 3, Constants::scaled()).unwrap();
        assert_eq!(p.delta, 4);
        assert_eq!(p.w_size, 192);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(ExpanderParams::from_constants(4, 0, Constants::paper()).is_err());
        assert!(ExpanderParams::from_constants(4, 5, Constants::paper()).is_err());
        assert!(ExpanderParams::explicit(4, 1, 5, 4, quarter()).is_err());
        assert!(ExpanderParams::explicit(4, 1, 2, 4, Ratio::new(1, 1)).is_err());
    }
}
