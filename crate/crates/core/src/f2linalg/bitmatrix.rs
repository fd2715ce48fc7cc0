use std::sync::OnceLock;

use rand::Rng;

use super::BitVec;
use crate::error::{Error, Result};

/// Dense row-major binary matrix. A column-major mirror is built on first
/// use of [`BitMatrix::column`].
#[derive(Clone, Default)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<BitVec>,
    columns: OnceLock<Vec<BitVec>>,
}

impl PartialEq for BitMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.cols == other.cols && self.rows == other.rows
    }
}

impl Eq for BitMatrix {}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix {}x{} [", self.rows.len(), self.cols)?;
        for r in &self.rows {
            writeln!(f, "  {r}")?;
        }
        write!(f, "]")
    }
}

/// Reduced row echelon form together with its pivot columns.
#[derive(Clone, Debug)]
pub struct RowEchelon {
    pub reduced: BitMatrix,
    pub rank: usize,
    pub pivot_cols: Vec<usize>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: (0..rows).map(|_| BitVec::zeros(cols)).collect(),
            columns: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.rows[i].set(i, true);
        }
        m
    }

    /// Every row must have length `cols`.
    pub fn from_rows(cols: usize, rows: Vec<BitVec>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::dim(format!("row {i} has length {} but matrix has {cols} columns", r.len())));
        }
        Ok(Self {
            cols,
            rows,
            columns: OnceLock::new(),
        })
    }

    /// Parses rows given as `0`/`1` strings.
    pub fn from_bitstrs(rows: &[&str]) -> Result<Self> {
        let parsed: Vec<BitVec> = rows
            .iter()
            .map(|s| BitVec::from_bitstr(s).ok_or_else(|| Error::invalid(format!("bad bit row {s:?}"))))
            .collect::<Result<_>>()?;
        let cols = parsed.first().map_or(0, BitVec::len);
        Self::from_rows(cols, parsed)
    }

    /// Builds a matrix from per-column lists of set row indices.
    pub fn from_column_supports(nrows: usize, supports: &[Vec<usize>]) -> Result<Self> {
        let mut m = Self::zeros(nrows, supports.len());
        for (j, sup) in supports.iter().enumerate() {
            for &i in sup {
                if i >= nrows {
                    return Err(Error::dim(format!("row index {i} out of range {nrows}")));
                }
                m.rows[i].flip(j);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &BitVec {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.columns = OnceLock::new();
        self.rows[i].set(j, value);
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BitVec::is_zero)
    }

    /// Column `j` as a bitvector of length `nrows`.
    pub fn column(&self, j: usize) -> &BitVec {
        &self.columns.get_or_init(|| self.transpose().rows)[j]
    }

    /// Row indices set in column `j`.
    pub fn column_support(&self, j: usize) -> Vec<usize> {
        self.column(j).support()
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            for j in r.iter_ones() {
                t.rows[j].set(i, true);
            }
        }
        t
    }

    /// `m · v` over F2.
    pub fn mul_vec(&self, v: &BitVec) -> Result<BitVec> {
        if v.len() != self.cols {
            return Err(Error::dim(format!(
                "vector length {} does not match {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = BitVec::zeros(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if r.dot(v) {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    /// Panicking variant of [`mul_vec`](Self::mul_vec) for internal hot paths
    /// where lengths are already validated.
    #[inline]
    pub fn apply(&self, v: &BitVec) -> BitVec {
        let mut out = BitVec::zeros(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if r.dot(v) {
                out.set(i, true);
            }
        }
        out
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn vstack(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.cols {
            return Err(Error::dim(format!("cannot stack {} and {} columns", self.cols, other.cols)));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        BitMatrix::from_rows(self.cols, rows)
    }

    pub fn with_row(&self, row: &BitVec) -> Result<BitMatrix> {
        if row.len() != self.cols {
            return Err(Error::dim("appended row length differs from column count"));
        }
        let mut rows = self.rows.clone();
        rows.push(row.clone());
        BitMatrix::from_rows(self.cols, rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> BitMatrix {
        BitMatrix {
            cols: self.cols,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            columns: OnceLock::new(),
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> BitMatrix {
        BitMatrix {
            cols: idx.len(),
            rows: self.rows.iter().map(|r| r.select(idx)).collect(),
            columns: OnceLock::new(),
        }
    }

    /// Reduced row echelon form; pivots are taken at the lowest available
    /// column index, and within a column at the first remaining row.
    pub fn row_reduce(&self) -> RowEchelon {
        let mut rows = self.rows.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == rows.len() {
                break;
            }
            let Some(p) = (r..rows.len()).find(|&i| rows[i].get(c)) else {
                continue;
            };
            rows.swap(r, p);
            let pivot = rows[r].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != r && row.get(c) {
                    row.xor_assign(&pivot);
                }
            }
            pivots.push(c);
            r += 1;
        }
        RowEchelon {
            reduced: BitMatrix {
                cols: self.cols,
                rows,
                columns: OnceLock::new(),
            },
            rank: r,
            pivot_cols: pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.row_reduce().rank
    }

    /// Some `x` with `m · x = rhs`, or `None` when `rhs` is outside the
    /// column space.
    pub fn solve(&self, rhs: &BitVec) -> Result<Option<BitVec>> {
        if rhs.len() != self.rows.len() {
            return Err(Error::dim(format!(
                "right-hand side has length {} but matrix has {} rows",
                rhs.len(),
                self.rows.len()
            )));
        }
        let augmented: Vec<BitVec> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.pushed(rhs.get(i)))
            .collect();
        let aug = BitMatrix::from_rows(self.cols + 1, augmented)?;
        let ech = aug.row_reduce();
        if ech.pivot_cols.last() == Some(&self.cols) {
            return Ok(None);
        }
        let mut x = BitVec::zeros(self.cols);
        for (i, &c) in ech.pivot_cols.iter().enumerate() {
            if ech.reduced.rows[i].get(self.cols) {
                x.set(c, true);
            }
        }
        Ok(Some(x))
    }

    /// Basis of the null space, one vector per free column.
    pub fn kernel_basis(&self) -> Vec<BitVec> {
        let ech = self.row_reduce();
        let mut is_pivot = vec![false; self.cols];
        for &c in &ech.pivot_cols {
            is_pivot[c] = true;
        }
        (0..self.cols)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut v = BitVec::zeros(self.cols);
                v.set(f, true);
                for (i, &c) in ech.pivot_cols.iter().enumerate() {
                    if ech.reduced.rows[i].get(f) {
                        v.set(c, true);
                    }
                }
                v
            })
            .collect()
    }

    /// Nonzero rows of the reduced form.
    pub fn row_basis(&self) -> Vec<BitVec> {
        let ech = self.row_reduce();
        ech.reduced.rows.into_iter().take(ech.rank).collect()
    }

    /// Uniform element of the row space.
    pub fn sample_rowspace<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        sample_span(&self.row_basis(), self.cols, rng)
    }

    /// True when `v` is an F2 combination of the rows.
    pub fn in_rowspace(&self, v: &BitVec) -> Result<bool> {
        Ok(self.transpose().solve(v)?.is_some())
    }
}

/// Uniform element of the span of an independent set of vectors.
pub fn sample_span<R: Rng + ?Sized>(basis: &[BitVec], len: usize, rng: &mut R) -> BitVec {
    let mut out = BitVec::zeros(len);
    for b in basis {
        if rng.gen::<bool>() {
            out.xor_assign(b);
        }
    }
    out
}
