use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::system::DecodingSystem;

/// Log-probability of compressed configurations at one global rate:
/// `ln π(E) = base + Σ_{j ∈ E} delta[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiTable {
    p: f64,
    base: f64,
    delta: Vec<f64>,
}

impl PiTable {
    pub fn new(sys: &DecodingSystem, p: f64) -> Result<Self> {
        let q = sys.per_copy_rate(p);
        if !(q > 0.0 && q < 0.5) {
            return Err(Error::invalid(format!("per-copy rate p/b = {q} must lie in (0, 1/2)")));
        }
        let probs = sys.fault_probabilities(p);
        let base = probs.iter().map(|&pj| (-pj).ln_1p()).sum();
        let delta = probs.iter().map(|&pj| pj.ln() - (-pj).ln_1p()).collect();
        Ok(Self { p, base, delta })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn ln_pi(&self, e: &BitVec) -> f64 {
        self.base + e.iter_ones().map(|j| self.delta[j]).sum::<f64>()
    }

    /// Change in `ln π` from flipping bit `j` of `e`.
    pub fn flip_delta(&self, e: &BitVec, j: usize) -> f64 {
        if e.get(j) {
            -self.delta[j]
        } else {
            self.delta[j]
        }
    }

    pub(crate) fn delta_at(&self, j: usize) -> f64 {
        self.delta[j]
    }

    /// Per-column coefficients of `ln(π_self / π_other)`.
    pub(crate) fn ratio_to(&self, other: &PiTable) -> PiTable {
        PiTable {
            p: self.p,
            base: self.base - other.base,
            delta: self.delta.iter().zip(&other.delta).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `ln π(E)` at global rate `p`, each column flipping with the parity
/// probability of its `m_j` copies at `p / b`.
pub fn pi_weight(sys: &DecodingSystem, e: &BitVec, p: f64) -> Result<f64> {
    if e.len() != sys.num_faults() {
        return Err(Error::dim("configuration length differs from column count"));
    }
    Ok(PiTable::new(sys, p)?.ln_pi(e))
}
