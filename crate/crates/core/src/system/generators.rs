use super::DecodingSystem;
use crate::error::{Error, Result};
use crate::f2linalg::BitMatrix;

/// Repetition code of odd length `n`: adjacent-parity checks and a single
/// all-ones action row.
pub fn gen_repetition(n: usize) -> Result<DecodingSystem> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::invalid(format!("repetition length must be odd and at least 3, got {n}")));
    }
    let supports: Vec<Vec<usize>> = (0..n)
        .map(|j| {
            let mut s = Vec::new();
            if j > 0 {
                s.push(j - 1);
            }
            if j + 1 < n {
                s.push(j);
            }
            s
        })
        .collect();
    let h = BitMatrix::from_column_supports(n - 1, &supports)?;
    let a = BitMatrix::from_column_supports(1, &vec![vec![0]; n])?;
    DecodingSystem::new(format!("rep({n})"), h, a, vec![1; n], 1.0)
}

/// Edge index on a `d1 × d2` torus: horizontal edges `(x,y)→(x+1,y)` come
/// first, then vertical edges `(x,y)→(x,y+1)`, each block in row-major order.
pub fn ut_edge(d1: usize, d2: usize, vertical: bool, x: usize, y: usize) -> usize {
    usize::from(vertical) * d1 * d2 + (y % d2) * d1 + (x % d1)
}

/// Bit-flip noise on the unrotated toric code with `d1` columns and `d2`
/// rows of vertices. Checks are vertex stars (all `d1·d2` kept, rank
/// `d1·d2 − 1`). Action row 0 cuts every horizontal cycle and row 1 every
/// vertical cycle, so horizontal logicals have weight `d1` and vertical
/// ones weight `d2`.
pub fn gen_unrotated_toric(d1: usize, d2: usize) -> Result<DecodingSystem> {
    if d1 < 2 || d2 < 2 {
        return Err(Error::invalid(format!("toric dimensions must be at least 2, got {d1}x{d2}")));
    }
    let n = 2 * d1 * d2;
    let mut supports = vec![Vec::new(); n];
    let vertex = |x: usize, y: usize| (y % d2) * d1 + (x % d1);
    let mut actions = vec![Vec::new(); n];
    for y in 0..d2 {
        for x in 0..d1 {
            let h = ut_edge(d1, d2, false, x, y);
            supports[h] = sorted_unique(vec![vertex(x, y), vertex(x + 1, y)]);
            let v = ut_edge(d1, d2, true, x, y);
            supports[v] = sorted_unique(vec![vertex(x, y), vertex(x, y + 1)]);
            if x == 0 {
                actions[h].push(0);
            }
            if y == 0 {
                actions[v].push(1);
            }
        }
    }
    let h = BitMatrix::from_column_supports(d1 * d2, &supports)?;
    let a = BitMatrix::from_column_supports(2, &actions)?;
    DecodingSystem::new(format!("UT({d1},{d2})-bitflip"), h, a, vec![1; n], 1.0)
}

fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Bit-flip noise on the rotated toric code with `d × d` qubits, `d` even.
/// Qubit `(i,j)` has index `i·d + j`; checks are the faces with `i + j`
/// even, numbered in row-major order. Action rows are the straight lines
/// `{(i,0)}` and `{(0,j)}`.
pub fn gen_rotated_toric(d: usize) -> Result<DecodingSystem> {
    if d < 4 || d % 2 == 1 {
        return Err(Error::invalid(format!("rotated toric size must be even and at least 4, got {d}")));
    }
    let n = d * d;
    let face = |i: usize, j: usize| -> usize {
        let (i, j) = (i % d, j % d);
        debug_assert_eq!((i + j) % 2, 0);
        (i * d + j) / 2
    };
    let mut supports = vec![Vec::new(); n];
    let mut actions = vec![Vec::new(); n];
    for i in 0..d {
        for j in 0..d {
            let q = i * d + j;
            let (f1, f2) = if (i + j) % 2 == 0 {
                (face(i, j), face(i + d - 1, j + d - 1))
            } else {
                (face(i + d - 1, j), face(i, j + d - 1))
            };
            let mut s = vec![f1, f2];
            s.sort_unstable();
            supports[q] = s;
            if j == 0 {
                actions[q].push(0);
            }
            if i == 0 {
                actions[q].push(1);
            }
        }
    }
    let h = BitMatrix::from_column_supports(n / 2, &supports)?;
    let a = BitMatrix::from_column_supports(2, &actions)?;
    DecodingSystem::new(format!("RT({d})-bitflip"), h, a, vec![1; n], 1.0)
}

/// Generators of the translation group of a toric system produced by this
/// module, as column permutations (`perm[j]` is the image of column `j`).
/// Returns `None` for labels not produced by the toric generators.
pub fn toric_translations(sys: &DecodingSystem) -> Option<Vec<Vec<usize>>> {
    let label = sys.label();
    if let Some(dims) = label.strip_prefix("UT(").and_then(|s| s.strip_suffix(")-bitflip")) {
        let (d1, d2) = dims.split_once(',')?;
        let (d1, d2): (usize, usize) = (d1.parse().ok()?, d2.parse().ok()?);
        let shift = |dx: usize, dy: usize| -> Vec<usize> {
            let mut perm = vec![0; 2 * d1 * d2];
            for vertical in [false, true] {
                for y in 0..d2 {
                    for x in 0..d1 {
                        perm[ut_edge(d1, d2, vertical, x, y)] = ut_edge(d1, d2, vertical, x + dx, y + dy);
                    }
                }
            }
            perm
        };
        return Some(vec![shift(1, 0), shift(0, 1)]);
    }
    if let Some(d) = label.strip_prefix("RT(").and_then(|s| s.strip_suffix(")-bitflip")) {
        let d: usize = d.parse().ok()?;
        let shift = |di: usize, dj: usize| -> Vec<usize> {
            (0..d * d)
                .map(|q| ((q / d + di) % d) * d + (q % d + dj) % d)
                .collect()
        };
        return Some(vec![shift(1, 1), shift(1, d - 1)]);
    }
    None
}
