use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly decreasing rates with the starting rate at `origin`. Points
/// below the origin form the downward sequence, points above it the
/// upward one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub p_values: Vec<f64>,
    /// `w_j = max(D/2, p_j N)` at each point.
    pub w_refs: Vec<f64>,
    pub origin: usize,
}

fn w_ref(p: f64, d: usize, n: u64) -> f64 {
    (d as f64 / 2.0).max(p * n as f64)
}

/// Points from `p0` toward `p_target`, excluding `p0`, stepping by
/// `2^{∓1/√w}` and clamping the last point to the target.
fn walk(p0: f64, p_target: f64, d: usize, n: u64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut p = p0;
    let down = p_target < p0;
    while p != p_target {
        let step = (1.0 / w_ref(p, d, n).sqrt()).exp2();
        let next = if down { p / step } else { p * step };
        p = if (down && next <= p_target) || (!down && next >= p_target) { p_target } else { next };
        out.push(p);
    }
    out
}

fn check_rate(p: f64) -> Result<()> {
    if p > 0.0 && p < 0.5 {
        Ok(())
    } else {
        Err(Error::invalid(format!("rate {p} must lie in (0, 1/2)")))
    }
}

/// Schedule from `p0` to `p_target` for distance `d` and expanded size `n`.
pub fn build_schedule(p0: f64, p_target: f64, d: usize, n: u64) -> Result<RateSchedule> {
    RateSchedule::through(p0, &[p_target], d, n)
}

impl RateSchedule {
    /// Two-sided schedule from `p0` passing through every target. Targets
    /// below `p0` extend the downward sequence, targets above it the
    /// upward one; each leg restarts the step rule at the previous target.
    pub fn through(p0: f64, targets: &[f64], d: usize, n: u64) -> Result<Self> {
        check_rate(p0)?;
        if d == 0 || n == 0 {
            return Err(Error::invalid("distance and fault count must be positive"));
        }
        for &t in targets {
            check_rate(t)?;
        }
        let mut below: Vec<f64> = targets.iter().copied().filter(|&t| t < p0).collect();
        below.sort_by(|a, b| b.total_cmp(a));
        below.dedup();
        let mut above: Vec<f64> = targets.iter().copied().filter(|&t| t > p0).collect();
        above.sort_by(f64::total_cmp);
        above.dedup();

        let mut up = Vec::new();
        let mut from = p0;
        for &t in &above {
            up.extend(walk(from, t, d, n));
            from = t;
        }
        let mut p_values: Vec<f64> = up.into_iter().rev().collect();
        let origin = p_values.len();
        p_values.push(p0);
        let mut from = p0;
        for &t in &below {
            p_values.extend(walk(from, t, d, n));
            from = t;
        }
        let w_refs = p_values.iter().map(|&p| w_ref(p, d, n)).collect();
        Ok(Self { p_values, w_refs, origin })
    }

    pub fn len(&self) -> usize {
        self.p_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_values.is_empty()
    }

    pub fn p0(&self) -> f64 {
        self.p_values[self.origin]
    }

    pub fn index_of(&self, p: f64) -> Option<usize> {
        self.p_values.iter().position(|&x| x == p)
    }

    /// Rates of the neighbours of point `j`, `None` past either end.
    pub fn neighbours(&self, j: usize) -> (Option<f64>, Option<f64>) {
        let prev = j.checked_sub(1).map(|i| self.p_values[i]);
        (prev, self.p_values.get(j + 1).copied())
    }

    /// Length of the one-directional sequence containing point `j`,
    /// counting the origin. The origin takes the longer of the two.
    pub fn sequence_len(&self, j: usize) -> usize {
        let down = self.len() - self.origin;
        let up = self.origin + 1;
        match j.cmp(&self.origin) {
            std::cmp::Ordering::Less => up,
            std::cmp::Ordering::Greater => down,
            std::cmp::Ordering::Equal => up.max(down),
        }
    }
}
