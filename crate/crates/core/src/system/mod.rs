//! Decoding systems in compressed form, example generators, CSS splitting
//! and the text interchange format.

mod css;
mod generators;
mod io;

pub use css::{css_split, CssSplit};
pub use generators::{gen_repetition, gen_rotated_toric, gen_unrotated_toric, toric_translations, ut_edge};
pub use io::{read_system, write_system, parse_system, format_system};

use crate::error::{Error, Result};
use crate::f2linalg::{BitMatrix, BitVec};

/// Check matrix `h`, action matrix `a`, per-column multiplicities and the
/// rate divisor `b` relating the global rate `p` to the per-copy rate
/// `q = p / b`.
#[derive(Clone, Debug)]
pub struct DecodingSystem {
    label: String,
    h: BitMatrix,
    a: BitMatrix,
    multiplicities: Vec<u32>,
    rate_divisor: f64,
    h_cols: Vec<BitVec>,
    a_cols: Vec<BitVec>,
    col_checks: Vec<Vec<usize>>,
    check_cols: Vec<Vec<usize>>,
    expanded_prefix: Vec<u64>,
}

impl PartialEq for DecodingSystem {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.h == other.h
            && self.a == other.a
            && self.multiplicities == other.multiplicities
            && self.rate_divisor == other.rate_divisor
    }
}

impl DecodingSystem {
    pub fn new(
        label: impl Into<String>,
        h: BitMatrix,
        a: BitMatrix,
        multiplicities: Vec<u32>,
        rate_divisor: f64,
    ) -> Result<Self> {
        let n = h.ncols();
        if a.ncols() != n || multiplicities.len() != n {
            return Err(Error::dim(format!(
                "check matrix has {n} columns, action matrix {}, multiplicities {}",
                a.ncols(),
                multiplicities.len()
            )));
        }
        if let Some(j) = multiplicities.iter().position(|&m| m == 0) {
            return Err(Error::invalid(format!("multiplicity of column {j} must be positive")));
        }
        if !(rate_divisor.is_finite() && rate_divisor > 0.0) {
            return Err(Error::invalid(format!("rate divisor must be positive, got {rate_divisor}")));
        }
        let ht = h.transpose();
        let at = a.transpose();
        let h_cols = ht.rows().to_vec();
        let a_cols = at.rows().to_vec();
        let col_checks = h_cols.iter().map(BitVec::support).collect();
        let check_cols = h.rows().iter().map(BitVec::support).collect();
        let mut expanded_prefix = Vec::with_capacity(n + 1);
        let mut acc = 0u64;
        expanded_prefix.push(0);
        for &m in &multiplicities {
            acc += u64::from(m);
            expanded_prefix.push(acc);
        }
        Ok(Self {
            label: label.into(),
            h,
            a,
            multiplicities,
            rate_divisor,
            h_cols,
            a_cols,
            col_checks,
            check_cols,
            expanded_prefix,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn h(&self) -> &BitMatrix {
        &self.h
    }

    pub fn a(&self) -> &BitMatrix {
        &self.a
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    pub fn rate_divisor(&self) -> f64 {
        self.rate_divisor
    }

    /// Number of check rows `M`.
    pub fn num_checks(&self) -> usize {
        self.h.nrows()
    }

    /// Number of action rows `K`.
    pub fn num_actions(&self) -> usize {
        self.a.nrows()
    }

    /// Number of compressed columns.
    pub fn num_faults(&self) -> usize {
        self.h.ncols()
    }

    /// Expanded column count `N = Σ m_j`.
    pub fn expanded_count(&self) -> u64 {
        *self.expanded_prefix.last().unwrap_or(&0)
    }

    /// True when every multiplicity is 1 and `b = 1`.
    pub fn is_uncompressed(&self) -> bool {
        self.rate_divisor == 1.0 && self.multiplicities.iter().all(|&m| m == 1)
    }

    /// Check rows triggered by column `j`.
    pub fn column_checks(&self, j: usize) -> &[usize] {
        &self.col_checks[j]
    }

    /// Columns participating in check `i`.
    pub fn check_columns(&self, i: usize) -> &[usize] {
        &self.check_cols[i]
    }

    pub fn h_column(&self, j: usize) -> &BitVec {
        &self.h_cols[j]
    }

    pub fn a_column(&self, j: usize) -> &BitVec {
        &self.a_cols[j]
    }

    /// Largest number of checks triggered by a single column.
    pub fn max_column_degree(&self) -> usize {
        self.col_checks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Compressed column holding expanded copy `idx`.
    pub fn expanded_to_compressed(&self, idx: u64) -> usize {
        debug_assert!(idx < self.expanded_count());
        self.expanded_prefix.partition_point(|&s| s <= idx) - 1
    }

    /// `σ = H e`, accumulated column by column.
    pub fn syndrome(&self, e: &BitVec) -> BitVec {
        let mut s = BitVec::zeros(self.num_checks());
        for j in e.iter_ones() {
            s.xor_assign(&self.h_cols[j]);
        }
        s
    }

    /// `A e`.
    pub fn action(&self, e: &BitVec) -> BitVec {
        let mut s = BitVec::zeros(self.num_actions());
        for j in e.iter_ones() {
            s.xor_assign(&self.a_cols[j]);
        }
        s
    }

    pub fn is_logical(&self, e: &BitVec) -> bool {
        self.syndrome(e).is_zero() && !self.action(e).is_zero()
    }

    pub fn is_stabilizer(&self, e: &BitVec) -> bool {
        self.syndrome(e).is_zero() && self.action(e).is_zero()
    }

    /// `ρ(e) = Π_{j ∈ supp(e)} m_j`, the number of expanded bitstrings that
    /// compress to `e` with one copy per support column.
    pub fn rho(&self, e: &BitVec) -> f64 {
        e.iter_ones().map(|j| f64::from(self.multiplicities[j])).product()
    }

    /// Sum of multiplicities over the support of `e`.
    pub fn expanded_weight(&self, e: &BitVec) -> u64 {
        e.iter_ones().map(|j| u64::from(self.multiplicities[j])).sum()
    }

    /// Per-copy rate `q = p / b`.
    pub fn per_copy_rate(&self, p: f64) -> f64 {
        p / self.rate_divisor
    }

    /// Probability that column `j` is flipped an odd number of times when
    /// each of its `m_j` copies flips independently with `q = p / b`.
    pub fn fault_probabilities(&self, p: f64) -> Vec<f64> {
        let q = self.per_copy_rate(p);
        self.multiplicities.iter().map(|&m| parity_probability(q, m)).collect()
    }

    /// Verifies that no action row lies in the row space of `h`.
    pub fn actions_independent_of_checks(&self) -> Result<bool> {
        let ht = self.h.transpose();
        for k in 0..self.num_actions() {
            if ht.solve(self.a.row(k))?.is_some() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `½(1 − (1 − 2q)^m)`.
pub fn parity_probability(q: f64, m: u32) -> f64 {
    // -expm1(m ln(1-2q)) / 2 keeps precision for tiny q.
    -0.5 * (f64::from(m) * (-2.0 * q).ln_1p()).exp_m1()
}
