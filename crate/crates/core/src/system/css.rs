use super::DecodingSystem;
use crate::error::{Error, Result};

/// Separate X- and Z-side systems extracted from a CSS-type parent.
/// `x` decodes noise detected by the Z checks; `z` the converse.
#[derive(Clone, Debug)]
pub struct CssSplit {
    pub x: DecodingSystem,
    pub z: DecodingSystem,
    /// Parent column of each `x` column.
    pub x_origin: Vec<usize>,
    /// Parent column of each `z` column.
    pub z_origin: Vec<usize>,
}

fn check_partition(name: &str, a: &[usize], b: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![0u8; n];
    for &i in a.iter().chain(b) {
        if i >= n {
            return Err(Error::invalid(format!("{name} row {i} out of range {n}")));
        }
        seen[i] += 1;
    }
    if seen.iter().any(|&c| c != 1) {
        return Err(Error::invalid(format!("{name} row sets do not partition the {n} rows")));
    }
    Ok(())
}

/// Splits `sys` into X and Z decoding problems. The X side keeps the Z-check
/// rows and the columns triggering at least one of them, with action rows
/// restricted to the logical-Z flips; the Z side is symmetric.
pub fn css_split(
    sys: &DecodingSystem,
    x_check_rows: &[usize],
    z_check_rows: &[usize],
    x_action_rows: &[usize],
    z_action_rows: &[usize],
) -> Result<CssSplit> {
    check_partition("check", x_check_rows, z_check_rows, sys.num_checks())?;
    check_partition("action", x_action_rows, z_action_rows, sys.num_actions())?;
    let side = |checks: &[usize], actions: &[usize], tag: &str| -> Result<(DecodingSystem, Vec<usize>)> {
        let cols: Vec<usize> = (0..sys.num_faults())
            .filter(|&j| checks.iter().any(|&i| sys.h().get(i, j)))
            .collect();
        let h = sys.h().select_rows(checks).select_columns(&cols);
        let a = sys.a().select_rows(actions).select_columns(&cols);
        let mult = cols.iter().map(|&j| sys.multiplicities()[j]).collect();
        let child = DecodingSystem::new(format!("{}-{tag}", sys.label()), h, a, mult, sys.rate_divisor())?;
        Ok((child, cols))
    };
    let (x, x_origin) = side(z_check_rows, z_action_rows, "X")?;
    let (z, z_origin) = side(x_check_rows, x_action_rows, "Z")?;
    Ok(CssSplit { x, z, x_origin, z_origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::f2linalg::BitMatrix;
    use crate::system::gen_unrotated_toric;

    /// Two X checks on columns 0..2, two Z checks on columns 2..4; column 2
    /// is shared (Y-type).
    fn mixed() -> DecodingSystem {
        let h = BitMatrix::from_bitstrs(&["11000", "01100", "00110", "00011"]).unwrap();
        let a = BitMatrix::from_bitstrs(&["11100", "00111"]).unwrap();
        DecodingSystem::new("mixed", h, a, vec![1; 5], 1.0).unwrap()
    }

    #[test]
    fn shared_column_appears_on_both_sides() {
        let s = css_split(&mixed(), &[0, 1], &[2, 3], &[0], &[1]).unwrap();
        assert_eq!(s.x_origin, vec![2, 3, 4]);
        assert_eq!(s.z_origin, vec![0, 1, 2]);
        assert_eq!(s.x.num_checks(), 2);
        assert_eq!(s.x.a().row(0).to_bitstr(), "111");
        assert_eq!(s.z.a().row(0).to_bitstr(), "111");
    }

    #[test]
    fn disjoint_sides_partition_columns() {
        let h = BitMatrix::from_bitstrs(&["1100", "0011"]).unwrap();
        let a = BitMatrix::from_bitstrs(&["1000", "0010"]).unwrap();
        let sys = DecodingSystem::new("d", h, a, vec![1; 4], 1.0).unwrap();
        let s = css_split(&sys, &[0], &[1], &[0], &[1]).unwrap();
        assert_eq!(s.x.num_faults() + s.z.num_faults(), sys.num_faults());
    }

    #[test]
    fn one_sided_noise() {
        let sys = gen_unrotated_toric(4, 4).unwrap();
        let all: Vec<usize> = (0..16).collect();
        let s = css_split(&sys, &[], &all, &[], &[0, 1]).unwrap();
        assert_eq!(s.z.num_faults(), 0);
        assert_eq!(s.x.h(), sys.h());
    }

    #[test]
    fn rejects_non_partition() {
        assert!(css_split(&mixed(), &[0, 1], &[1, 2, 3], &[0], &[1]).is_err());
        assert!(css_split(&mixed(), &[0, 1], &[2, 3], &[0], &[]).is_err());
    }
}
