use serde::{Deserialize, Serialize};

use super::chain::{ChainRecord, KernelStats};
use crate::error::{Error, Result};

/// Estimate of `P(p_to) / P(p_from)` between adjacent schedule points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub p_from: f64,
    pub p_to: f64,
    pub r: f64,
    pub stderr: f64,
    /// Constant `c` used in the final evaluation.
    pub c: f64,
}

/// Bennett estimate at fixed `c` from the chain at `j - 1` (`prev`) and
/// the chain at `j` (`next`), with a delta-method standard error.
pub fn bennett_ratio(prev: &ChainRecord, next: &ChainRecord, c: f64) -> Result<RatioEstimate> {
    if prev.rate_index + 1 != next.rate_index || prev.p_next != Some(next.p) || next.p_prev != Some(prev.p) {
        return Err(Error::invalid("ratio needs chains at adjacent points of one schedule"));
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    let (tn, td) = (prev.ln_ratio_next.len(), next.ln_ratio_prev.len());
    if tn == 0 || td == 0 {
        return Err(Error::invalid("both chains need samples"));
    }
    let ln_c = c.ln();
    let num = KernelStats::of(&prev.ln_ratio_next, ln_c);
    let den = KernelStats::of(&next.ln_ratio_prev, -ln_c);
    if !(den.mean > 0.0) {
        return Err(Error::invalid("ratio denominator vanished"));
    }
    let r = c * num.mean / den.mean;
    let rel2 = num.variance / (tn as f64 * num.mean.powi(2)) + den.variance / (td as f64 * den.mean.powi(2));
    Ok(RatioEstimate { p_from: prev.p, p_to: next.p, r, stderr: r * rel2.sqrt(), c })
}

/// Bennett estimate with three fixed-point updates `c ← r̂(c)` from `c = 1`.
pub fn estimate_ratio(prev: &ChainRecord, next: &ChainRecord) -> Result<RatioEstimate> {
    let mut c = 1.0;
    let mut est = bennett_ratio(prev, next, c)?;
    for _ in 1..3 {
        c = est.r;
        est = bennett_ratio(prev, next, c)?;
    }
    Ok(est)
}
