use super::Problem;
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;

/// Depth-first branch-and-bound minimum-cost decoder.
///
/// Each node branches on the unsatisfied check with the fewest available
/// columns; branch `k` adds that check's `k`-th available column and
/// excludes the earlier ones, so every support is visited at most once.
pub struct BranchAndBound {
    node_budget: u64,
}

struct Search<'a> {
    problem: &'a Problem,
    blocked: Vec<bool>,
    chosen: BitVec,
    best: BitVec,
    best_cost: i64,
    min_cost: i64,
    max_degree: usize,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn lower_bound(&self, unsat: usize) -> i64 {
        if unsat == 0 {
            0
        } else {
            unsat.div_ceil(self.max_degree.max(1)) as i64 * self.min_cost
        }
    }

    fn visit(&mut self, residual: &BitVec, cost: i64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExhausted(format!("branch-and-bound exceeded {} nodes", self.budget)));
        }
        let unsat = residual.weight();
        if unsat == 0 {
            if cost < self.best_cost || (cost == self.best_cost && self.chosen.support_cmp(&self.best).is_lt()) {
                self.best = self.chosen.clone();
                self.best_cost = cost;
            }
            return Ok(());
        }
        if cost + self.lower_bound(unsat) > self.best_cost {
            return Ok(());
        }
        let mut branch: Option<Vec<usize>> = None;
        for i in residual.iter_ones() {
            let avail: Vec<usize> = self.problem.check_cols[i]
                .iter()
                .copied()
                .filter(|&j| !self.blocked[j])
                .collect();
            if branch.as_ref().is_none_or(|b| avail.len() < b.len()) {
                let empty = avail.is_empty();
                branch = Some(avail);
                if empty {
                    break;
                }
            }
        }
        let cols = branch.unwrap_or_default();
        for &j in &cols {
            let c = cost + self.problem.costs[j];
            self.blocked[j] = true;
            if c <= self.best_cost {
                self.chosen.set(j, true);
                let next = residual.xor(&self.problem.h_cols[j]);
                let r = self.visit(&next, c);
                self.chosen.set(j, false);
                r?;
            }
        }
        for &j in &cols {
            self.blocked[j] = false;
        }
        Ok(())
    }
}

impl BranchAndBound {
    pub fn new(node_budget: u64) -> Self {
        Self { node_budget }
    }

    pub fn solve(&self, problem: &Problem, syndrome: &BitVec) -> Result<BitVec> {
        let seed = problem.h().solve(syndrome)?.ok_or(Error::Infeasible)?;
        let n = problem.num_cols();
        let mut search = Search {
            problem,
            blocked: vec![false; n],
            chosen: BitVec::zeros(n),
            best_cost: problem.int_cost(&seed),
            best: seed,
            min_cost: problem.costs.iter().copied().min().unwrap_or(1),
            max_degree: problem.col_checks.iter().map(Vec::len).max().unwrap_or(1),
            nodes: 0,
            budget: self.node_budget,
        };
        search.visit(syndrome, 0)?;
        Ok(search.best)
    }
}
