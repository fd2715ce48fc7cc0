use rayon::prelude::*;

use super::logicals::{LogicalSet, Provenance};
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::system::DecodingSystem;

struct Tree<'a> {
    sys: &'a DecodingSystem,
    w_max: usize,
    max_degree: usize,
}

impl Tree<'_> {
    /// Kernel vectors of weight `<= w_max` whose smallest column is `j0`
    /// and that contain no smaller kernel vector with the same start.
    fn rooted_at(&self, j0: usize) -> Vec<BitVec> {
        let n = self.sys.num_faults();
        let mut support = vec![j0];
        let mut syn = self.sys.h_column(j0).clone();
        let mut excluded = vec![false; n];
        excluded[..=j0].iter_mut().for_each(|e| *e = true);
        let mut out = Vec::new();
        self.grow(&mut support, &mut syn, &mut excluded, &mut out);
        out
    }

    fn grow(&self, support: &mut Vec<usize>, syn: &mut BitVec, excluded: &mut [bool], out: &mut Vec<BitVec>) {
        if syn.is_zero() {
            out.push(BitVec::from_indices(self.sys.num_faults(), support));
            return;
        }
        // Each further column clears at most max_degree unsatisfied checks.
        let lb = syn.weight().div_ceil(self.max_degree.max(1));
        if support.len() + lb > self.w_max {
            return;
        }
        let mut best: Option<Vec<usize>> = None;
        for c in syn.iter_ones() {
            let avail: Vec<usize> = self.sys.check_columns(c).iter().copied().filter(|&j| !excluded[j]).collect();
            if best.as_ref().is_none_or(|b| avail.len() < b.len()) {
                let empty = avail.is_empty();
                best = Some(avail);
                if empty {
                    break;
                }
            }
        }
        let cands = best.unwrap_or_default();
        // Branch k adds cands[k] and excludes cands[..k], so the branches
        // partition the extensions.
        for &k in &cands {
            excluded[k] = true;
            support.push(k);
            syn.xor_assign(self.sys.h_column(k));
            self.grow(support, syn, excluded, out);
            syn.xor_assign(self.sys.h_column(k));
            support.pop();
        }
        for &k in &cands {
            excluded[k] = false;
        }
    }
}

/// All logicals of each weight from the distance up to `w_max`, by a
/// decision-tree search that adjoins columns touching an unsatisfied check.
///
/// Completeness needs every logical of weight `<= w_max` to be free of
/// smaller kernel vectors, which holds when `w_max < 2D` and
/// `w_max < D + s` for the minimum stabilizer weight `s`; otherwise an
/// error is returned.
pub fn enumerate_logicals_exact(sys: &DecodingSystem, w_max: usize) -> Result<Vec<LogicalSet>> {
    let tree = Tree { sys, w_max, max_degree: sys.max_column_degree() };
    let mut kernel: Vec<BitVec> = (0..sys.num_faults())
        .into_par_iter()
        .flat_map_iter(|j0| tree.rooted_at(j0))
        .collect();
    kernel.sort_by(|a, b| a.weight().cmp(&b.weight()).then_with(|| a.support_cmp(b)));
    kernel.dedup();
    let (logicals, stabilizers): (Vec<BitVec>, Vec<BitVec>) = kernel.into_iter().partition(|x| !sys.action(x).is_zero());
    let d = logicals
        .iter()
        .map(BitVec::weight)
        .min()
        .ok_or_else(|| Error::invalid(format!("no logical of weight <= {w_max}")))?;
    if w_max >= 2 * d {
        return Err(Error::invalid(format!("w_max = {w_max} reaches twice the distance {d}; enumeration is not exhaustive")));
    }
    if let Some(s) = stabilizers.iter().map(BitVec::weight).min() {
        if w_max >= d + s {
            return Err(Error::invalid(format!(
                "w_max = {w_max} reaches D + s = {} (stabilizer of weight {s}); enumeration is not exhaustive",
                d + s
            )));
        }
    }
    let mut sets: Vec<LogicalSet> = (d..=w_max).map(|w| LogicalSet::new(w, sys.num_faults())).collect();
    for l in logicals {
        let w = l.weight();
        sets[w - d].insert_verified(l, Provenance::Exact);
    }
    for s in &mut sets {
        s.complete = true;
    }
    Ok(sets)
}
