use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::decoders::{Backend, DecoderConfig};
use crate::f2linalg::{BitMatrix, BitVec};
use crate::system::{gen_repetition, gen_rotated_toric, gen_unrotated_toric, ut_edge, DecodingSystem};

fn bnb() -> DecoderConfig {
    DecoderConfig::with_backend(Backend::BranchAndBound)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic repetition code on `n` bits with a single-bit action.
pub(crate) fn ring(n: usize) -> DecodingSystem {
    let supports: Vec<Vec<usize>> = (0..n).map(|j| if j == 0 { vec![0, n - 1] } else { vec![j - 1, j] }).collect();
    let h = BitMatrix::from_column_supports(n, &supports).unwrap();
    let mut acts = vec![Vec::new(); n];
    acts[0].push(0);
    let a = BitMatrix::from_column_supports(1, &acts).unwrap();
    DecodingSystem::new(format!("ring({n})"), h, a, vec![1; n], 1.0).unwrap()
}

fn ut_row(d: usize, y: usize) -> BitVec {
    let cols: Vec<usize> = (0..d).map(|x| ut_edge(d, d, false, x, y)).collect();
    BitVec::from_indices(2 * d * d, &cols)
}

#[test]
fn exact_distances() {
    let rep = gen_repetition(5).unwrap();
    let r = distance_exact(&rep, &bnb()).unwrap();
    assert_eq!(r.distance, 5);
    assert_eq!(r.witnesses, vec![BitVec::ones(5)]);
    assert_eq!(distance_exact(&gen_unrotated_toric(4, 4).unwrap(), &bnb()).unwrap().distance, 4);
    assert_eq!(distance_exact(&gen_unrotated_toric(3, 5).unwrap(), &DecoderConfig::default()).unwrap().distance, 3);
    assert_eq!(distance_exact(&gen_rotated_toric(4).unwrap(), &bnb()).unwrap().distance, 4);
    assert!(distance_exact(&rep, &DecoderConfig::with_backend(Backend::BpOsd0)).is_err());
}

#[test]
fn upper_bounds() {
    let rep = gen_repetition(5).unwrap();
    let ub = distance_upper_bound(&rep, &bnb(), 50, &mut rng(1)).unwrap();
    assert_eq!(ub.distance, Some(5));
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let ub = distance_upper_bound(&ut, &bnb(), 200, &mut rng(2)).unwrap();
    assert!(ub.distance.unwrap() <= 6 && ub.distance.unwrap() >= 4);
    assert!(ub.witnesses.iter().all(|w| ut.is_logical(w)));
}

#[test]
fn enumeration_counts() {
    let rep = gen_repetition(5).unwrap();
    let sets = enumerate_logicals_exact(&rep, 5).unwrap();
    assert_eq!(sets.len(), 1);
    assert_eq!(sets[0].members(), vec![BitVec::ones(5)]);
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let sets = enumerate_logicals_exact(&ut, 4).unwrap();
    assert_eq!((sets[0].weight(), sets[0].len()), (4, 8));
    assert!(sets[0].complete);
    let rt = gen_rotated_toric(4).unwrap();
    assert_eq!(enumerate_logicals_exact(&rt, 4).unwrap()[0].len(), 4 + 4 * 6);
    assert!(enumerate_logicals_exact(&ut, 8).is_err());
}

#[test]
fn enumeration_closed_under_translations() {
    for sys in [gen_unrotated_toric(4, 4).unwrap(), gen_unrotated_toric(3, 5).unwrap(), gen_rotated_toric(4).unwrap()] {
        let grp = SymmetryGroup::toric(&sys).unwrap();
        let set = enumerate_logicals_exact(&sys, sys.num_faults().min(4)).unwrap().remove(0);
        let closed = expand_by_symmetry(&set, &grp, &sys).unwrap();
        assert_eq!(closed.len(), set.len(), "{}", sys.label());
    }
}

#[test]
fn search_matches_enumeration_and_saturates() {
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let exact = enumerate_logicals_exact(&ut, 4).unwrap().remove(0);
    let opts = SearchOptions { prior_perturbation: true, ..Default::default() };
    let rep = search_logicals_report(&ut, &bnb(), Some(4), 500, &opts, &mut rng(3)).unwrap();
    assert_eq!(rep.set.members(), exact.members());
    let u = &rep.unique_after_round;
    assert!(u.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(u[399], 8);
    let found = search_logicals(&ut, &bnb(), None, 100, &SearchOptions { decimation: true, ..Default::default() }, &mut rng(4)).unwrap();
    assert_eq!(found.weight(), 4);
    assert!(found.iter_with_provenance().all(|(_, p)| p == Provenance::Decimation));
}

#[test]
fn restricted_search_finds_other_class() {
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let horizontal: Vec<usize> = (0..16).collect();
    let opts = SearchOptions { restrict_columns: horizontal.clone(), prior_perturbation: true, ..Default::default() };
    let found = search_logicals(&ut, &bnb(), Some(4), 200, &opts, &mut rng(5)).unwrap();
    assert_eq!(found.len(), 4);
    assert!(found.iter().all(|l| l.iter_ones().all(|j| j >= 16)));
}

#[test]
fn symmetry_orbits() {
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let mut one = LogicalSet::new(4, 32);
    one.insert(&ut, ut_row(4, 0), Provenance::Search).unwrap();
    let grp = SymmetryGroup::toric(&ut).unwrap();
    let orbit = expand_by_symmetry(&one, &grp, &ut).unwrap();
    assert_eq!(orbit.len(), 4);
    assert_eq!(orbit.provenance(&ut_row(4, 2)), Some(Provenance::Symmetry));
    let id = SymmetryGroup::new(vec![(0..32).collect()], false).unwrap();
    assert_eq!(expand_by_symmetry(&one, &id, &ut).unwrap(), one);
    // Swapping one horizontal edge with a vertical edge breaks the loop.
    let mut bad: Vec<usize> = (0..32).collect();
    bad.swap(0, 16);
    let partial = SymmetryGroup::new(vec![bad.clone()], true).unwrap();
    assert_eq!(expand_by_symmetry(&one, &partial, &ut).unwrap(), one);
    let strict = SymmetryGroup::new(vec![bad], false).unwrap();
    assert!(expand_by_symmetry(&one, &strict, &ut).is_err());
    assert!(SymmetryGroup::new(vec![vec![0, 0]], false).is_err());
}

#[test]
fn coverage() {
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let all = enumerate_logicals_exact(&ut, 4).unwrap().remove(0);
    assert_eq!(coverage_estimate(&all, &ut, &bnb(), 50, &mut rng(6)).unwrap().fraction, 1.0);
    let empty = LogicalSet::new(4, 32);
    assert_eq!(coverage_estimate(&empty, &ut, &bnb(), 50, &mut rng(6)).unwrap().fraction, 0.0);
    let mut half = LogicalSet::new(4, 32);
    for (i, l) in all.iter().enumerate() {
        if i % 2 == 0 {
            half.insert(&ut, l.clone(), Provenance::Exact).unwrap();
        }
    }
    let c = coverage_estimate(&half, &ut, &bnb(), 400, &mut rng(7)).unwrap();
    assert!((c.fraction - 0.5).abs() < 4.0 * 0.025, "{c:?}");
}

#[test]
fn ut4_exact_onset() {
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let all = enumerate_logicals_exact(&ut, 4).unwrap().remove(0);
    let r = onset_exact(&ut, &all).unwrap();
    assert_eq!((r.restrictions_count, r.fails_count), (48.0, 24.0));
    assert!((r.onset_fraction - 24.0 / 496.0).abs() < 1e-15);
    assert!(!r.lower_bound);
    let mut part = LogicalSet::new(4, 32);
    for l in all.iter().take(4) {
        part.insert(&ut, l.clone(), Provenance::Exact).unwrap();
    }
    let p = onset_exact(&ut, &part).unwrap();
    assert!(p.lower_bound && p.fails_count <= 24.0);
    assert!(onset_exact(&gen_repetition(5).unwrap(), &enumerate_logicals_exact(&gen_repetition(5).unwrap(), 5).unwrap()[0]).is_err());
}

#[test]
fn ut4_sampled_onset() {
    let ut = gen_unrotated_toric(4, 4).unwrap();
    let all = enumerate_logicals_exact(&ut, 4).unwrap().remove(0);
    let s = onset_sampled(&ut, &all, 100_000, &mut rng(8)).unwrap();
    assert!((s.fails_estimate - 24.0).abs() <= 3.0 * s.stderr.max(1e-9), "{s:?}");
}

#[test]
fn ring_sampled_onset_collapses() {
    let sys = ring(4);
    let all = enumerate_logicals_exact(&sys, 4).unwrap().remove(0);
    assert_eq!(all.len(), 1);
    let exact = onset_exact(&sys, &all).unwrap();
    assert_eq!(exact.fails_count, 3.0);
    let s = onset_sampled(&sys, &all, 1000, &mut rng(9)).unwrap();
    assert_eq!(s.fails_estimate, 3.0);
    assert_eq!(s.stderr, 0.0);
}

#[test]
fn odd_repetition_onset() {
    let rep = gen_repetition(5).unwrap();
    let l5 = enumerate_logicals_exact(&rep, 5).unwrap().remove(0);
    let l6 = LogicalSet::new(6, 5);
    let r = onset_exact_odd(&rep, &l5, &l6).unwrap();
    assert_eq!(r.onset_weight, 3);
    assert_eq!(r.fails_count, 10.0);
    assert!((r.onset_fraction - 1.0).abs() < 1e-12);
    assert!(onset_exact_odd(&rep, &l5, &LogicalSet::new(7, 5)).is_err());
}

#[test]
fn exponential_fit() {
    let pts: Vec<(f64, f64)> = [4.0f64, 6.0, 8.0].iter().map(|&d| (d, 3.0 * (0.7 * d).exp())).collect();
    let (a, b) = extrapolate_exponential(&pts).unwrap();
    assert!((a - 3.0).abs() < 1e-12 && (b - 0.7).abs() < 1e-12);
    assert!(extrapolate_exponential(&pts[..1]).is_err());
    assert!(extrapolate_exponential(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
}

#[test]
fn binomials() {
    assert_eq!(binomial(32, 2), 496.0);
    assert_eq!(binomial(30, 15), 155_117_520.0);
    assert_eq!(restrictions(&BitVec::ones(4), 2).count(), 6);
}
