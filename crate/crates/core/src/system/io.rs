use std::fmt::Write as _;
use std::path::Path;

use super::DecodingSystem;
use crate::error::{Error, Result};
use crate::f2linalg::BitMatrix;

fn fmt_list(items: &[usize]) -> String {
    if items.is_empty() {
        "-".to_owned()
    } else {
        items.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

/// Canonical text form of a system.
pub fn format_system(sys: &DecodingSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "SYSTEM {}", sys.label());
    let _ = writeln!(
        out,
        "DIMS M={} K={} NTILDE={} B={}",
        sys.num_checks(),
        sys.num_actions(),
        sys.num_faults(),
        sys.rate_divisor()
    );
    for j in 0..sys.num_faults() {
        let _ = writeln!(
            out,
            "FAULT {j} MULT={} CHECKS={} ACTIONS={}",
            sys.multiplicities()[j],
            fmt_list(sys.column_checks(j)),
            fmt_list(&sys.a_column(j).support())
        );
    }
    out
}

pub fn write_system(sys: &DecodingSystem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_system(sys))?;
    Ok(())
}

pub fn read_system(path: impl AsRef<Path>) -> Result<DecodingSystem> {
    parse_system(&std::fs::read_to_string(path)?)
}

struct Dims {
    m: usize,
    k: usize,
    n: usize,
    b: f64,
}

fn field<'a>(tok: &'a str, key: &str, line: usize) -> Result<&'a str> {
    tok.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("expected {key}=..., found {tok:?}"),
        })
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} {s:?}"),
    })
}

fn parse_list(s: &str, bound: usize, what: &str, line: usize) -> Result<Vec<usize>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    let items: Vec<usize> = s
        .split(',')
        .map(|t| parse_num(t, what, line))
        .collect::<Result<_>>()?;
    if items.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parse {
            line,
            message: format!("{what} indices must be strictly increasing"),
        });
    }
    if let Some(&bad) = items.iter().find(|&&i| i >= bound) {
        return Err(Error::Parse {
            line,
            message: format!("{what} index {bad} out of range {bound}"),
        });
    }
    Ok(items)
}

/// Parses the interchange format. Errors carry 1-based line numbers.
pub fn parse_system(text: &str) -> Result<DecodingSystem> {
    let mut label: Option<String> = None;
    let mut dims: Option<Dims> = None;
    let mut checks: Vec<Vec<usize>> = Vec::new();
    let mut actions: Vec<Vec<usize>> = Vec::new();
    let mut mults: Vec<u32> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("SYSTEM") {
            if label.is_some() {
                return Err(Error::Parse { line, message: "duplicate SYSTEM line".into() });
            }
            label = Some(rest.trim().to_owned());
            continue;
        }
        let content = trimmed.split('#').next().unwrap_or("").trim();
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("DIMS") => {
                if dims.is_some() {
                    return Err(Error::Parse { line, message: "duplicate DIMS line".into() });
                }
                let t: Vec<&str> = toks.collect();
                if t.len() != 4 {
                    return Err(Error::Parse { line, message: "DIMS needs M, K, NTILDE and B".into() });
                }
                let d = Dims {
                    m: parse_num(field(t[0], "M", line)?, "M", line)?,
                    k: parse_num(field(t[1], "K", line)?, "K", line)?,
                    n: parse_num(field(t[2], "NTILDE", line)?, "NTILDE", line)?,
                    b: parse_num(field(t[3], "B", line)?, "B", line)?,
                };
                if !(d.b.is_finite() && d.b > 0.0) {
                    return Err(Error::Parse { line, message: format!("B must be positive, got {}", d.b) });
                }
                dims = Some(d);
            }
            Some("FAULT") => {
                let d = dims.as_ref().ok_or(Error::Parse {
                    line,
                    message: "FAULT before DIMS".into(),
                })?;
                let t: Vec<&str> = toks.collect();
                if t.len() != 4 {
                    return Err(Error::Parse { line, message: "FAULT needs id, MULT, CHECKS and ACTIONS".into() });
                }
                let j: usize = parse_num(t[0], "fault id", line)?;
                if j < checks.len() {
                    return Err(Error::Parse { line, message: format!("duplicate fault id {j}") });
                }
                if j != checks.len() {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected fault {} but found {j}", checks.len()),
                    });
                }
                if j >= d.n {
                    return Err(Error::Parse { line, message: format!("fault id {j} exceeds NTILDE={}", d.n) });
                }
                let m: i64 = parse_num(field(t[1], "MULT", line)?, "multiplicity", line)?;
                if m <= 0 || m > i64::from(u32::MAX) {
                    return Err(Error::Parse { line, message: format!("multiplicity must be positive, got {m}") });
                }
                mults.push(m as u32);
                checks.push(parse_list(field(t[2], "CHECKS", line)?, d.m, "check", line)?);
                actions.push(parse_list(field(t[3], "ACTIONS", line)?, d.k, "action", line)?);
            }
            Some(other) => {
                return Err(Error::Parse { line, message: format!("unknown record {other:?}") });
            }
            None => {}
        }
    }
    let d = dims.ok_or(Error::Parse { line: last_line, message: "missing DIMS line".into() })?;
    if checks.len() != d.n {
        return Err(Error::Parse {
            line: last_line,
            message: format!("expected {} FAULT lines, found {}", d.n, checks.len()),
        });
    }
    let h = BitMatrix::from_column_supports(d.m, &checks)?;
    let a = BitMatrix::from_column_supports(d.k, &actions)?;
    DecodingSystem::new(label.unwrap_or_default(), h, a, mults, d.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{gen_repetition, gen_rotated_toric, gen_unrotated_toric};

    #[test]
    fn round_trip_generated_systems() {
        for sys in [
            gen_repetition(5).unwrap(),
            gen_unrotated_toric(3, 5).unwrap(),
            gen_rotated_toric(4).unwrap(),
        ] {
            let text = format_system(&sys);
            let back = parse_system(&text).unwrap();
            assert_eq!(back, sys);
            assert_eq!(format_system(&back), text);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rep5.txt");
        let sys = gen_repetition(5).unwrap();
        write_system(&sys, &path).unwrap();
        assert_eq!(read_system(&path).unwrap(), sys);
    }

    #[test]
    fn duplicate_fault_id_is_rejected() {
        let text = "SYSTEM t\nDIMS M=1 K=1 NTILDE=2 B=1\nFAULT 0 MULT=1 CHECKS=0 ACTIONS=0\nFAULT 0 MULT=1 CHECKS=0 ACTIONS=-\n";
        match parse_system(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_multiplicity_is_rejected() {
        for m in ["0", "-3"] {
            let text = format!("SYSTEM t\nDIMS M=1 K=1 NTILDE=1 B=1\nFAULT 0 MULT={m} CHECKS=0 ACTIONS=0\n");
            assert!(matches!(parse_system(&text), Err(Error::Parse { line: 3, .. })));
        }
    }

    #[test]
    fn malformed_lists_report_line() {
        let text = "# header\nSYSTEM t\nDIMS M=2 K=1 NTILDE=1 B=1\nFAULT 0 MULT=1 CHECKS=1,0 ACTIONS=0\n";
        assert!(matches!(parse_system(text), Err(Error::Parse { line: 4, .. })));
        let text = "SYSTEM t\nDIMS M=2 K=1 NTILDE=1 B=1\nFAULT 0 MULT=1 CHECKS=5 ACTIONS=0\n";
        assert!(matches!(parse_system(text), Err(Error::Parse { line: 3, .. })));
        let text = "SYSTEM t\nDIMS M=2 K=1 NTILDE=2 B=1\nFAULT 0 MULT=1 CHECKS=0 ACTIONS=0\n";
        assert!(parse_system(text).is_err());
    }

    #[test]
    fn multiplicities_and_divisor() {
        let text = "SYSTEM circ\nDIMS M=1 K=1 NTILDE=2 B=15\nFAULT 0 MULT=1 CHECKS=0 ACTIONS=- # data\nFAULT 1 MULT=15 CHECKS=0 ACTIONS=0\n";
        let sys = parse_system(text).unwrap();
        assert_eq!(sys.multiplicities(), &[1, 15]);
        assert_eq!(sys.expanded_count(), 16);
        assert!((sys.per_copy_rate(0.015) - 0.001).abs() < 1e-15);
    }
}
