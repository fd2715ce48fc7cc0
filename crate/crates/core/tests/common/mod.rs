#![allow(dead_code)]

use std::collections::HashMap;

use failspec::decoders::Decoder;
use failspec::f2linalg::BitVec;
use failspec::system::DecodingSystem;

/// Error whose support is the set bits of `mask`.
pub fn error_of(n: usize, mask: u64) -> BitVec {
    let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
    BitVec::from_indices(n, &idx)
}

/// Every weight-`w` error on `n` columns.
pub fn errors_of_weight(n: usize, w: usize) -> Vec<BitVec> {
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(w);
    fn rec(n: usize, w: usize, start: usize, pick: &mut Vec<usize>, out: &mut Vec<BitVec>) {
        if pick.len() == w {
            out.push(BitVec::from_indices(n, pick));
            return;
        }
        for j in start..n {
            pick.push(j);
            rec(n, w, j + 1, pick, out);
            pick.pop();
        }
    }
    rec(n, w, 0, &mut pick, &mut out);
    out
}

pub fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Failing-error counts per weight from decoding all `2^n` errors.
pub fn exhaustive_fail_counts(sys: &DecodingSystem, dec: &Decoder) -> Vec<u64> {
    let n = sys.num_faults();
    assert!(n <= 20, "exhaustive oracle limited to 20 columns");
    let mut counts = vec![0u64; n + 1];
    for mask in 0..1u64 << n {
        let e = error_of(n, mask);
        if dec.is_failure(sys, &e).unwrap() {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    counts
}

/// `P(q) = Σ_e q^|e| (1-q)^(n-|e|) [e fails]`, summed error by error.
pub fn exhaustive_rate(sys: &DecodingSystem, dec: &Decoder, q: f64) -> f64 {
    let n = sys.num_faults();
    (0..1u64 << n)
        .filter(|&mask| dec.is_failure(sys, &error_of(n, mask)).unwrap())
        .map(|mask| {
            let w = mask.count_ones() as i32;
            q.powi(w) * (1.0 - q).powi(n as i32 - w)
        })
        .sum()
}

/// Weight-`w` errors with trivial syndrome and nontrivial action.
pub fn brute_logicals(sys: &DecodingSystem, w: usize) -> Vec<BitVec> {
    errors_of_weight(sys.num_faults(), w).into_iter().filter(|e| sys.is_logical(e)).collect()
}

/// Failing weight-`k` count for an optimal decoder. Per syndrome the
/// lowest-weight action class wins; among weight-`k` minimisers one
/// largest class succeeds. Panics on ties below weight `k`.
pub fn brute_onset_fails(sys: &DecodingSystem, k: usize) -> f64 {
    let n = sys.num_faults();
    let mut lowest: HashMap<BitVec, (usize, Vec<BitVec>)> = HashMap::new();
    for w in 0..k {
        for e in errors_of_weight(n, w) {
            let entry = lowest.entry(sys.syndrome(&e)).or_insert((w, Vec::new()));
            if entry.0 == w && !entry.1.contains(&sys.action(&e)) {
                entry.1.push(sys.action(&e));
            }
        }
    }
    let mut classes: HashMap<BitVec, HashMap<BitVec, f64>> = HashMap::new();
    let mut fails = 0.0;
    for e in errors_of_weight(n, k) {
        let s = sys.syndrome(&e);
        match lowest.get(&s) {
            Some((_, actions)) => {
                assert_eq!(actions.len(), 1, "tie below weight {k}");
                if actions[0] != sys.action(&e) {
                    fails += sys.rho(&e);
                }
            }
            None => *classes.entry(s).or_default().entry(sys.action(&e)).or_default() += sys.rho(&e),
        }
    }
    for c in classes.values() {
        let total: f64 = c.values().sum();
        let max = c.values().copied().fold(0.0, f64::max);
        fails += total - max;
    }
    fails
}
