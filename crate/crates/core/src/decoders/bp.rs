use super::{llr, Problem};
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;

/// Normalized min-sum belief propagation with order-zero OSD completion.
pub struct BpOsd0 {
    iters: usize,
    scale: f64,
}

impl BpOsd0 {
    pub fn new(iters: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::invalid(format!("BP scale must lie in (0, 1], got {scale}")));
        }
        Ok(Self { iters, scale })
    }

    /// Returns the correction and whether BP converged on its own.
    pub fn decode(&self, problem: &Problem, syndrome: &BitVec) -> Result<(BitVec, bool)> {
        let n = problem.num_cols();
        let channel: Vec<f64> = problem.priors.iter().map(|&p| llr(p)).collect();
        let posterior = self.min_sum(problem, syndrome, &channel);
        match posterior {
            Ok(x) => Ok((x, true)),
            Err(post) => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| post[a].total_cmp(&post[b]).then(a.cmp(&b)));
                let permuted = problem.h().select_columns(&order);
                let xp = permuted.solve(syndrome)?.ok_or(Error::Infeasible)?;
                let mut x = BitVec::zeros(n);
                for k in xp.iter_ones() {
                    x.set(order[k], true);
                }
                Ok((x, false))
            }
        }
    }

    /// Hard decision on convergence, otherwise the final posteriors.
    fn min_sum(&self, problem: &Problem, syndrome: &BitVec, channel: &[f64]) -> std::result::Result<BitVec, Vec<f64>> {
        let n = problem.num_cols();
        let checks = &problem.check_cols;
        let mut v2c: Vec<Vec<f64>> = checks.iter().map(|cols| cols.iter().map(|&j| channel[j]).collect()).collect();
        let mut c2v: Vec<Vec<f64>> = checks.iter().map(|cols| vec![0.0; cols.len()]).collect();
        let mut post = channel.to_vec();
        let hard = |post: &[f64]| BitVec::from_bools(&post.iter().map(|&l| l < 0.0).collect::<Vec<_>>());
        let x = hard(&post);
        if &problem.syndrome(&x) == syndrome {
            return Ok(x);
        }
        for _ in 0..self.iters {
            for (i, cols) in checks.iter().enumerate() {
                let mut sign = if syndrome.get(i) { -1.0 } else { 1.0 };
                let (mut min1, mut min2, mut arg) = (f64::INFINITY, f64::INFINITY, usize::MAX);
                for (k, &m) in v2c[i].iter().enumerate() {
                    if m < 0.0 {
                        sign = -sign;
                    }
                    let a = m.abs();
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        arg = k;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for k in 0..cols.len() {
                    let m = v2c[i][k];
                    let s = if m < 0.0 { -sign } else { sign };
                    let mag = if k == arg { min2 } else { min1 };
                    c2v[i][k] = s * self.scale * mag;
                }
            }
            post.copy_from_slice(channel);
            for (i, cols) in checks.iter().enumerate() {
                for (k, &j) in cols.iter().enumerate() {
                    post[j] += c2v[i][k];
                }
            }
            for (i, cols) in checks.iter().enumerate() {
                for (k, &j) in cols.iter().enumerate() {
                    v2c[i][k] = post[j] - c2v[i][k];
                }
            }
            let x = hard(&post);
            if &problem.syndrome(&x) == syndrome {
                return Ok(x);
            }
        }
        debug_assert_eq!(post.len(), n);
        Err(post)
    }
}
