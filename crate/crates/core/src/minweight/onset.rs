use std::collections::{HashMap, HashSet};

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logicals::LogicalSet;
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::rng::{child_seed, stream};
use crate::sampling::{ln_choose, NeumaierSum};
use crate::system::DecodingSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsetResult {
    /// Distance `D`.
    pub d: usize,
    /// Onset weight `ceil(D/2)`.
    pub onset_weight: usize,
    /// Expanded count of distinct restrictions.
    pub restrictions_count: f64,
    /// Expanded count of failing onset-weight errors.
    pub fails_count: f64,
    /// `fails_count / C(N, onset_weight)`.
    pub onset_fraction: f64,
    /// True when some input logical set was incomplete.
    pub lower_bound: bool,
    pub distinct_restrictions: usize,
    pub distinct_syndromes: usize,
}

/// `C(n, k)` as a float, exact while it fits in 53 bits.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Every weight-`k` sub-support of `l`.
pub fn restrictions(l: &BitVec, k: usize) -> impl Iterator<Item = BitVec> + '_ {
    let n = l.len();
    l.support().into_iter().combinations(k).map(move |c| BitVec::from_indices(n, &c))
}

/// Expanded class sizes keyed by syndrome, then action.
type ClassTable = HashMap<BitVec, HashMap<BitVec, f64>>;

fn class_table<'a>(sys: &DecodingSystem, errors: impl Iterator<Item = &'a BitVec>) -> ClassTable {
    let mut table = ClassTable::new();
    for e in errors {
        *table.entry(sys.syndrome(e)).or_default().entry(sys.action(e)).or_default() += sys.rho(e);
    }
    table
}

/// Per syndrome, everything outside one largest class fails. With `t`
/// tied largest classes this equals charging each tied class `1 - 1/t`.
fn table_fails(table: &ClassTable) -> f64 {
    let mut acc = NeumaierSum::default();
    for classes in table.values() {
        let total: f64 = classes.values().sum();
        let max = classes.values().copied().fold(0.0, f64::max);
        acc.add(total - max);
    }
    acc.value()
}

fn distinct_restrictions(found: &LogicalSet, k: usize) -> HashSet<BitVec> {
    found.members().par_iter().flat_map_iter(|l| restrictions(l, k).collect::<Vec<_>>()).collect()
}

fn onset_fraction(sys: &DecodingSystem, fails: f64, k: usize) -> f64 {
    fails * (-ln_choose(sys.expanded_count(), k as u64)).exp()
}

fn check_set(sys: &DecodingSystem, found: &LogicalSet) -> Result<()> {
    if found.num_faults() != sys.num_faults() {
        return Err(Error::dim("logical set and system differ in column count"));
    }
    if found.is_empty() {
        return Err(Error::invalid("logical set is empty"));
    }
    Ok(())
}

/// Exact failure count at weight `D/2` for even `D`: restrictions grouped
/// by syndrome and action, expanded by multiplicity, with one largest
/// class per syndrome succeeding.
pub fn onset_exact(sys: &DecodingSystem, found: &LogicalSet) -> Result<OnsetResult> {
    check_set(sys, found)?;
    let d = found.weight();
    if d % 2 == 1 {
        return Err(Error::invalid(format!("distance {d} is odd; use the odd-distance onset")));
    }
    let k = d / 2;
    let xs = distinct_restrictions(found, k);
    let table = class_table(sys, xs.iter());
    let fails = table_fails(&table);
    Ok(OnsetResult {
        d,
        onset_weight: k,
        restrictions_count: xs.iter().map(|x| sys.rho(x)).sum(),
        fails_count: fails,
        onset_fraction: onset_fraction(sys, fails, k),
        lower_bound: !found.complete,
        distinct_restrictions: xs.len(),
        distinct_syndromes: table.len(),
    })
}

/// Onset for odd `D` at weight `(D+1)/2`: every restriction of a weight-`D`
/// logical fails; remaining restrictions of weight-`(D+1)` logicals are
/// classified by the largest-class rule.
pub fn onset_exact_odd(sys: &DecodingSystem, found_d: &LogicalSet, found_d1: &LogicalSet) -> Result<OnsetResult> {
    check_set(sys, found_d)?;
    let d = found_d.weight();
    if d.is_multiple_of(2) {
        return Err(Error::invalid(format!("distance {d} is even; use the even-distance onset")));
    }
    if found_d1.weight() != d + 1 || found_d1.num_faults() != sys.num_faults() {
        return Err(Error::invalid(format!("second set must hold weight-{} logicals", d + 1)));
    }
    let k = d.div_ceil(2);
    let x1 = distinct_restrictions(found_d, k);
    let x2: Vec<BitVec> = distinct_restrictions(found_d1, k).into_iter().filter(|x| !x1.contains(x)).collect();
    let table = class_table(sys, x2.iter());
    let sure: f64 = x1.iter().map(|x| sys.rho(x)).sum();
    let fails = sure + table_fails(&table);
    let syndromes: HashSet<BitVec> = x1.iter().map(|x| sys.syndrome(x)).chain(table.keys().cloned()).collect();
    Ok(OnsetResult {
        d,
        onset_weight: k,
        restrictions_count: sure + x2.iter().map(|x| sys.rho(x)).sum::<f64>(),
        fails_count: fails,
        onset_fraction: onset_fraction(sys, fails, k),
        lower_bound: !(found_d.complete && found_d1.complete),
        distinct_restrictions: x1.len() + x2.len(),
        distinct_syndromes: syndromes.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledOnset {
    pub fails_estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    pub onset_fraction: f64,
    pub lower_bound: bool,
}

/// Weight-`D/2` errors sharing the syndrome of restriction `r` of `l0`,
/// built from complements of `r` and `l0 \ r` inside the logicals, and
/// the number `μ(r)` of logicals enclosing `r`.
pub fn min_weight_class(logicals: &[BitVec], l0: &BitVec, r: &BitVec) -> (HashSet<BitVec>, usize) {
    let r_comp = l0.and_not(r);
    let mut mu = 0usize;
    let mut emin: HashSet<BitVec> = HashSet::new();
    for l in logicals {
        if r.is_subset_of(l) {
            emin.insert(l.and_not(r));
            mu += 1;
        }
        if r_comp.is_subset_of(l) {
            emin.insert(l.and_not(&r_comp));
        }
    }
    (emin, mu)
}

/// `ρ(r) g(r) / μ(r)` for restriction `r` of `l0`.
pub fn onset_term(sys: &DecodingSystem, logicals: &[BitVec], l0: &BitVec, r: &BitVec) -> f64 {
    let rho = sys.rho(r);
    let (emin, mu) = min_weight_class(logicals, l0, r);
    assert!(mu > 0, "sampled logical must enclose its restriction");
    let mut classes: HashMap<BitVec, f64> = HashMap::new();
    for q in &emin {
        *classes.entry(sys.action(q)).or_default() += sys.rho(q);
    }
    let n_max = classes.values().copied().fold(0.0, f64::max);
    let tied = classes.values().filter(|&&v| v == n_max).count();
    let own = classes.get(&sys.action(r)).copied().unwrap_or(0.0);
    let g = if own == n_max { 1.0 - 1.0 / tied as f64 } else { 1.0 };
    rho * g / mu as f64
}

/// Unbiased estimate of the even-distance failure count from `samples`
/// uniform (logical, restriction) pairs.
pub fn onset_sampled<R: Rng + ?Sized>(sys: &DecodingSystem, found: &LogicalSet, samples: u64, rng: &mut R) -> Result<SampledOnset> {
    check_set(sys, found)?;
    let d = found.weight();
    if d % 2 == 1 {
        return Err(Error::invalid(format!("distance {d} is odd; sampled onset needs even distance")));
    }
    if samples < 2 {
        return Err(Error::invalid("at least two samples are required"));
    }
    let k = d / 2;
    let logicals = found.members();
    let seed = child_seed(rng);
    const CHUNK: u64 = 256;
    let (sum, sum_sq) = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = stream(seed, c);
            let (mut s, mut s2) = (NeumaierSum::default(), NeumaierSum::default());
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                let l0 = &logicals[r.gen_range(0..logicals.len())];
                let supp = l0.support();
                let pick: Vec<usize> = rand::seq::index::sample(&mut r, d, k).into_iter().map(|i| supp[i]).collect();
                let term = onset_term(sys, &logicals, l0, &BitVec::from_indices(sys.num_faults(), &pick));
                s.add(term);
                s2.add(term * term);
            }
            (s.value(), s2.value())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let t = samples as f64;
    let mean = sum / t;
    let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
    let scale = logicals.len() as f64 * binomial(d as u64, k as u64);
    let est = scale * mean;
    Ok(SampledOnset {
        fails_estimate: est,
        stderr: scale * (var / t).sqrt(),
        samples,
        onset_fraction: onset_fraction(sys, est, k),
        lower_bound: !found.complete,
    })
}

/// Least-squares fit of `ln v = ln α + β D`.
pub fn extrapolate_exponential(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::invalid("at least two points are required"));
    }
    if let Some(&(_, v)) = points.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::invalid(format!("values must be positive, found {v}")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points need at least two distinct distances"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let beta = sxy / sxx;
    Ok(((my - beta * mx).exp(), beta))
}
