use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::system::DecodingSystem;

/// How a logical was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Search,
    Symmetry,
    Decimation,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Exact => "exact",
            Provenance::Search => "search",
            Provenance::Symmetry => "symmetry",
            Provenance::Decimation => "decimation",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Provenance::Exact),
            "search" => Ok(Provenance::Search),
            "symmetry" => Ok(Provenance::Symmetry),
            "decimation" => Ok(Provenance::Decimation),
            other => Err(Error::invalid(format!("unknown provenance {other:?}"))),
        }
    }
}

/// Verified logicals of one compressed weight, keyed by sorted support.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicalSet {
    weight: usize,
    num_faults: usize,
    members: BTreeMap<Vec<usize>, (BitVec, Provenance)>,
    /// True when the set is known to contain every logical of this weight.
    pub complete: bool,
}

impl LogicalSet {
    pub fn new(weight: usize, num_faults: usize) -> Self {
        Self { weight, num_faults, members: BTreeMap::new(), complete: false }
    }

    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn num_faults(&self) -> usize {
        self.num_faults
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Inserts `l` after checking `H l = 0`, `A l ≠ 0` and `|l| = weight`.
    /// Returns whether it was new.
    pub fn insert(&mut self, sys: &DecodingSystem, l: BitVec, prov: Provenance) -> Result<bool> {
        if l.len() != self.num_faults {
            return Err(Error::dim(format!("logical of length {} in a set over {} faults", l.len(), self.num_faults)));
        }
        if l.weight() != self.weight {
            return Err(Error::invalid(format!("logical of weight {} in a weight-{} set", l.weight(), self.weight)));
        }
        if !sys.is_logical(&l) {
            return Err(Error::invalid(format!("{:?} is not a logical", l.support())));
        }
        Ok(self.insert_verified(l, prov))
    }

    pub(crate) fn insert_verified(&mut self, l: BitVec, prov: Provenance) -> bool {
        let key = l.support();
        if self.members.contains_key(&key) {
            return false;
        }
        self.members.insert(key, (l, prov));
        true
    }

    pub fn contains(&self, l: &BitVec) -> bool {
        self.members.contains_key(&l.support())
    }

    /// Members in canonical (sorted support) order.
    pub fn iter(&self) -> impl Iterator<Item = &BitVec> {
        self.members.values().map(|(l, _)| l)
    }

    pub fn iter_with_provenance(&self) -> impl Iterator<Item = (&BitVec, Provenance)> {
        self.members.values().map(|(l, p)| (l, *p))
    }

    pub fn provenance(&self, l: &BitVec) -> Option<Provenance> {
        self.members.get(&l.support()).map(|(_, p)| *p)
    }

    pub fn members(&self) -> Vec<BitVec> {
        self.iter().cloned().collect()
    }

    /// Adds every member of `other`, keeping existing provenance.
    pub fn merge(&mut self, other: &LogicalSet) -> Result<usize> {
        if other.weight != self.weight || other.num_faults != self.num_faults {
            return Err(Error::invalid("cannot merge logical sets of different weight or length"));
        }
        Ok(other.iter_with_provenance().filter(|(l, p)| self.insert_verified((*l).clone(), *p)).count())
    }

    /// One line per member: `weight=<w> cols=<i1,i2,...> prov=<tag>`,
    /// after a `# faults=<n> complete=<flag>` header.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# faults={} complete={}", self.num_faults, self.complete)?;
        for (cols, (_, prov)) in &self.members {
            let list: Vec<String> = cols.iter().map(usize::to_string).collect();
            writeln!(out, "weight={} cols={} prov={}", self.weight, list.join(","), prov)?;
        }
        Ok(())
    }

    /// Reads a file written by [`LogicalSet::write`], verifying each member
    /// against `sys`.
    pub fn read<R: BufRead>(input: R, sys: &DecodingSystem) -> Result<Self> {
        let n = sys.num_faults();
        let mut complete = false;
        let mut set: Option<LogicalSet> = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let parse_err = |message: String| Error::Parse { line: lineno, message };
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            if let Some(header) = text.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    match tok.split_once('=') {
                        Some(("complete", v)) => {
                            complete = v.parse().map_err(|_| parse_err(format!("bad complete flag {v:?}")))?
                        }
                        Some(("faults", v)) => {
                            let f: usize = v.parse().map_err(|_| parse_err(format!("bad fault count {v:?}")))?;
                            if f != n {
                                return Err(parse_err(format!("file has {f} faults, system has {n}")));
                            }
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let (mut weight, mut cols, mut prov) = (None, None, Provenance::Exact);
            for tok in text.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| parse_err(format!("expected key=value, found {tok:?}")))?;
                match k {
                    "weight" => weight = Some(v.parse::<usize>().map_err(|_| parse_err(format!("bad weight {v:?}")))?),
                    "cols" => {
                        let list: Vec<usize> = if v.is_empty() {
                            Vec::new()
                        } else {
                            v.split(',')
                                .map(|c| c.parse::<usize>().map_err(|_| parse_err(format!("bad column {c:?}"))))
                                .collect::<Result<_>>()?
                        };
                        if list.iter().any(|&c| c >= n) || list.windows(2).any(|w| w[0] >= w[1]) {
                            return Err(parse_err("columns must be increasing and in range".into()));
                        }
                        cols = Some(list);
                    }
                    "prov" => prov = v.parse().map_err(|e: Error| parse_err(e.to_string()))?,
                    other => return Err(parse_err(format!("unknown key {other:?}"))),
                }
            }
            let weight = weight.ok_or_else(|| parse_err("missing weight".into()))?;
            let cols = cols.ok_or_else(|| parse_err("missing cols".into()))?;
            let s = set.get_or_insert_with(|| LogicalSet::new(weight, n));
            s.insert(sys, BitVec::from_indices(n, &cols), prov)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        let mut s = set.ok_or_else(|| Error::invalid("logical set file has no members"))?;
        s.complete = complete;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{gen_repetition, gen_unrotated_toric};

    #[test]
    fn insert_checks_invariants() {
        let sys = gen_repetition(5).unwrap();
        let mut s = LogicalSet::new(5, 5);
        assert!(s.insert(&sys, BitVec::ones(5), Provenance::Exact).unwrap());
        assert!(!s.insert(&sys, BitVec::ones(5), Provenance::Search).unwrap());
        assert_eq!(s.provenance(&BitVec::ones(5)), Some(Provenance::Exact));
        let mut s3 = LogicalSet::new(3, 5);
        assert!(s3.insert(&sys, BitVec::from_indices(5, &[0, 1, 2]), Provenance::Exact).is_err());
    }

    #[test]
    fn file_round_trip() {
        let sys = gen_unrotated_toric(3, 3).unwrap();
        let mut s = LogicalSet::new(3, sys.num_faults());
        for y in 0..3 {
            let cols: Vec<usize> = (0..3).map(|x| crate::system::ut_edge(3, 3, false, x, y)).collect();
            let mut cols = cols;
            cols.sort_unstable();
            s.insert(&sys, BitVec::from_indices(sys.num_faults(), &cols), Provenance::Symmetry).unwrap();
        }
        s.complete = true;
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("weight=3 cols="));
        assert!(text.contains("prov=symmetry"));
        let back = LogicalSet::read(&buf[..], &sys).unwrap();
        assert_eq!(back, s);
        assert!(LogicalSet::read("weight=3 cols=0,1 prov=exact\n".as_bytes(), &sys).is_err());
    }
}
