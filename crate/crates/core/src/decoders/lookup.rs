use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::Problem;
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;

/// Minimum-cost correction for every reachable syndrome.
///
/// Built by Dijkstra over syndrome space. If `c` is the canonical optimum for
/// `s` and `j ∈ c`, then `c \ {j}` is the canonical optimum for `s ⊕ h_j`,
/// because the tie order survives adding a common element. Offering
/// `canon(s) ∪ {j}` from every finalized `s` therefore reaches every
/// canonical optimum.
pub struct LookupTable {
    index: HashMap<BitVec, usize>,
    corrections: Vec<BitVec>,
}

impl LookupTable {
    pub fn build(problem: &Problem, limit: usize) -> Result<Self> {
        let rank = problem.h().rank();
        if rank >= usize::BITS as usize - 1 || (1usize << rank) > limit {
            return Err(Error::invalid(format!(
                "lookup table needs 2^{rank} entries, above the limit of {limit}"
            )));
        }
        let size = 1usize << rank;
        let n = problem.num_cols();
        let mut index: HashMap<BitVec, usize> = HashMap::with_capacity(size);
        let mut syndromes: Vec<BitVec> = Vec::with_capacity(size);
        let mut best: Vec<(i64, BitVec)> = Vec::with_capacity(size);
        let mut done: Vec<bool> = Vec::with_capacity(size);
        let mut heap = BinaryHeap::new();

        index.insert(BitVec::zeros(problem.num_checks()), 0);
        syndromes.push(BitVec::zeros(problem.num_checks()));
        best.push((0, BitVec::zeros(n)));
        done.push(false);
        heap.push(Reverse((0i64, 0usize)));

        while let Some(Reverse((cost, idx))) = heap.pop() {
            if done[idx] || cost != best[idx].0 {
                continue;
            }
            done[idx] = true;
            let base = best[idx].1.clone();
            let s = syndromes[idx].clone();
            for j in 0..n {
                if base.get(j) {
                    continue;
                }
                let cand_cost = cost + problem.costs[j];
                let s2 = s.xor(&problem.h_cols[j]);
                let target = match index.get(&s2) {
                    Some(&t) => {
                        if done[t] || cand_cost > best[t].0 {
                            continue;
                        }
                        t
                    }
                    None => {
                        let t = syndromes.len();
                        index.insert(s2.clone(), t);
                        syndromes.push(s2);
                        best.push((i64::MAX, BitVec::zeros(n)));
                        done.push(false);
                        t
                    }
                };
                let mut cand = base.clone();
                cand.set(j, true);
                let improves = cand_cost < best[target].0
                    || (cand_cost == best[target].0 && cand.support_cmp(&best[target].1).is_lt());
                if improves {
                    best[target] = (cand_cost, cand);
                    heap.push(Reverse((cand_cost, target)));
                }
            }
        }
        debug_assert_eq!(syndromes.len(), size);
        Ok(Self {
            index,
            corrections: best.into_iter().map(|(_, c)| c).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.corrections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrections.is_empty()
    }

    pub fn lookup(&self, syndrome: &BitVec) -> Option<&BitVec> {
        self.index.get(syndrome).map(|&i| &self.corrections[i])
    }
}
