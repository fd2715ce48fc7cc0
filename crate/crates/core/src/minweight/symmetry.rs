use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::logicals::{LogicalSet, Provenance};
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::system::{toric_translations, DecodingSystem};

/// Column permutations (`perm[j]` is the image of column `j`). A partial
/// group is not guaranteed to preserve logicals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    pub generators: Vec<Vec<usize>>,
    pub partial: bool,
}

impl SymmetryGroup {
    pub fn new(generators: Vec<Vec<usize>>, partial: bool) -> Result<Self> {
        for g in &generators {
            let mut seen = vec![false; g.len()];
            for &j in g {
                if j >= g.len() || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::invalid("generator is not a permutation"));
                }
            }
        }
        Ok(Self { generators, partial })
    }

    /// Translation group of a toric system built by this crate.
    pub fn toric(sys: &DecodingSystem) -> Option<Self> {
        toric_translations(sys).map(|g| Self { generators: g, partial: false })
    }
}

pub fn permute(l: &BitVec, perm: &[usize]) -> BitVec {
    let mut out = BitVec::zeros(l.len());
    for j in l.iter_ones() {
        out.set(perm[j], true);
    }
    out
}

/// Closure of `found` under the generators. Images that are not logicals
/// are dropped for partial groups and rejected otherwise.
pub fn expand_by_symmetry(found: &LogicalSet, grp: &SymmetryGroup, sys: &DecodingSystem) -> Result<LogicalSet> {
    let n = found.num_faults();
    if grp.generators.iter().any(|g| g.len() != n) {
        return Err(Error::dim(format!("generators must permute {n} columns")));
    }
    let mut out = found.clone();
    let mut queue: VecDeque<BitVec> = found.iter().cloned().collect();
    while let Some(l) = queue.pop_front() {
        for g in &grp.generators {
            let img = permute(&l, g);
            if out.contains(&img) {
                continue;
            }
            if !sys.is_logical(&img) {
                if grp.partial {
                    continue;
                }
                return Err(Error::invalid(format!(
                    "generator maps logical {:?} to non-logical {:?}",
                    l.support(),
                    img.support()
                )));
            }
            out.insert_verified(img.clone(), Provenance::Symmetry);
            queue.push_back(img);
        }
    }
    Ok(out)
}
