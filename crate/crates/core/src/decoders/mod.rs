//! Decoder backends mapping a syndrome to a correction in the compressed
//! representation.
//!
//! Every backend works on a [`Problem`]: a check matrix with per-column
//! costs. Min-weight backends return the cheapest correction; among equally
//! cheap ones the support that wins [`BitVec::support_cmp`] is returned, so
//! lookup and branch-and-bound agree bit for bit.

mod bnb;
mod bp;
mod lookup;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f2linalg::{BitMatrix, BitVec};
use crate::system::DecodingSystem;

pub use bnb::BranchAndBound;
pub use bp::BpOsd0;
pub use lookup::LookupTable;

/// Scale applied to real costs before integer comparison.
const COST_SCALE: f64 = 1e6;

/// Global rate at which default priors are instantiated.
pub const DEFAULT_PRIOR_RATE: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Lookup,
    BranchAndBound,
    BpOsd0,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lookup" => Ok(Backend::Lookup),
            "branch_and_bound" | "bnb" => Ok(Backend::BranchAndBound),
            "bp_osd0" | "bposd" => Ok(Backend::BpOsd0),
            other => Err(Error::invalid(format!("unknown decoder backend {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub backend: Backend,
    /// Per-column flip probabilities. When absent, min-weight backends use
    /// unit cost per compressed column and BP uses the system's parity
    /// probabilities at [`DEFAULT_PRIOR_RATE`].
    pub priors: Option<Vec<f64>>,
    pub bp_iters: usize,
    pub bp_scale: f64,
    pub deterministic_seed: u64,
    /// Node limit for branch-and-bound.
    pub node_budget: u64,
    /// Largest syndrome space the lookup backend will tabulate.
    pub lookup_limit: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Lookup,
            priors: None,
            bp_iters: 50,
            bp_scale: 0.625,
            deterministic_seed: 0,
            node_budget: 50_000_000,
            lookup_limit: 1 << 20,
        }
    }
}

impl DecoderConfig {
    pub fn with_backend(backend: Backend) -> Self {
        Self { backend, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoding {
    pub correction: BitVec,
    /// Sum of multiplicities over the support.
    pub weight: u64,
    /// Sum of per-column costs over the support.
    pub cost: f64,
    /// False when BP did not converge and OSD completed the correction.
    pub converged: bool,
}

/// Generic decoding problem: checks, costs and priors per column.
#[derive(Clone, Debug)]
pub struct Problem {
    h: BitMatrix,
    col_checks: Vec<Vec<usize>>,
    check_cols: Vec<Vec<usize>>,
    h_cols: Vec<BitVec>,
    costs: Vec<i64>,
    real_costs: Vec<f64>,
    priors: Vec<f64>,
    multiplicities: Vec<u32>,
}

fn llr(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

impl Problem {
    /// `real_costs` of `None` means unit cost per column.
    pub fn new(h: BitMatrix, real_costs: Option<Vec<f64>>, priors: Vec<f64>, multiplicities: Vec<u32>) -> Result<Self> {
        let n = h.ncols();
        if priors.len() != n || multiplicities.len() != n {
            return Err(Error::dim("priors and multiplicities must match the column count"));
        }
        if let Some(bad) = priors.iter().find(|&&p| !(p > 0.0 && p < 0.5)) {
            return Err(Error::invalid(format!("prior {bad} outside (0, 1/2)")));
        }
        let real_costs = real_costs.unwrap_or_else(|| vec![1.0; n]);
        if real_costs.len() != n || real_costs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("costs must be positive and finite"));
        }
        let costs = real_costs
            .iter()
            .map(|&c| ((c * COST_SCALE).round() as i64).max(1))
            .collect();
        let h_cols = h.transpose().rows().to_vec();
        let col_checks = h_cols.iter().map(BitVec::support).collect();
        let check_cols = h.rows().iter().map(BitVec::support).collect();
        Ok(Self {
            h,
            col_checks,
            check_cols,
            h_cols,
            costs,
            real_costs,
            priors,
            multiplicities,
        })
    }

    /// The decoding problem of a system under a configuration.
    pub fn from_system(sys: &DecodingSystem, cfg: &DecoderConfig) -> Result<Self> {
        let (costs, priors) = match &cfg.priors {
            Some(p) => {
                if p.len() != sys.num_faults() {
                    return Err(Error::dim(format!(
                        "{} priors supplied for {} columns",
                        p.len(),
                        sys.num_faults()
                    )));
                }
                (Some(p.iter().map(|&x| llr(x)).collect()), p.clone())
            }
            None => (None, sys.fault_probabilities(DEFAULT_PRIOR_RATE)),
        };
        Self::new(sys.h().clone(), costs, priors, sys.multiplicities().to_vec())
    }

    /// Appends a constraint row.
    pub fn with_row(&self, row: &BitVec) -> Result<Self> {
        let h = self.h.with_row(row)?;
        Self::new(h, Some(self.real_costs.clone()), self.priors.clone(), self.multiplicities.clone())
    }

    /// Restriction to the listed columns.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let h = self.h.select_columns(cols);
        let pick = |v: &[f64]| cols.iter().map(|&j| v[j]).collect::<Vec<_>>();
        Self::new(
            h,
            Some(pick(&self.real_costs)),
            pick(&self.priors),
            cols.iter().map(|&j| self.multiplicities[j]).collect(),
        )
    }

    pub fn h(&self) -> &BitMatrix {
        &self.h
    }

    pub fn num_checks(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.h.ncols()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn syndrome(&self, e: &BitVec) -> BitVec {
        let mut s = BitVec::zeros(self.num_checks());
        for j in e.iter_ones() {
            s.xor_assign(&self.h_cols[j]);
        }
        s
    }

    fn int_cost(&self, e: &BitVec) -> i64 {
        e.iter_ones().map(|j| self.costs[j]).sum()
    }

    fn finish(&self, correction: BitVec, converged: bool) -> Decoding {
        let weight = correction.iter_ones().map(|j| u64::from(self.multiplicities[j])).sum();
        let cost = correction.iter_ones().map(|j| self.real_costs[j]).sum();
        Decoding {
            correction,
            weight,
            cost,
            converged,
        }
    }
}

enum Engine {
    Lookup(LookupTable),
    Bnb(BranchAndBound),
    Bp(BpOsd0),
}

/// A decoder bound to one problem. Construction may be expensive (the lookup
/// backend tabulates every syndrome); decoding is pure and thread-safe.
pub struct Decoder {
    problem: Problem,
    engine: Engine,
}

impl Decoder {
    pub fn new(sys: &DecodingSystem, cfg: &DecoderConfig) -> Result<Self> {
        Self::for_problem(Problem::from_system(sys, cfg)?, cfg)
    }

    pub fn for_problem(problem: Problem, cfg: &DecoderConfig) -> Result<Self> {
        let engine = match cfg.backend {
            Backend::Lookup => Engine::Lookup(LookupTable::build(&problem, cfg.lookup_limit)?),
            Backend::BranchAndBound => Engine::Bnb(BranchAndBound::new(cfg.node_budget)),
            Backend::BpOsd0 => Engine::Bp(BpOsd0::new(cfg.bp_iters, cfg.bp_scale)?),
        };
        Ok(Self { problem, engine })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn is_min_weight(&self) -> bool {
        !matches!(self.engine, Engine::Bp(_))
    }

    pub fn decode(&self, syndrome: &BitVec) -> Result<Decoding> {
        if syndrome.len() != self.problem.num_checks() {
            return Err(Error::dim(format!(
                "syndrome length {} but problem has {} checks",
                syndrome.len(),
                self.problem.num_checks()
            )));
        }
        let (c, converged) = match &self.engine {
            Engine::Lookup(t) => (t.lookup(syndrome).ok_or(Error::Infeasible)?.clone(), true),
            Engine::Bnb(b) => (b.solve(&self.problem, syndrome)?, true),
            Engine::Bp(b) => b.decode(&self.problem, syndrome)?,
        };
        debug_assert_eq!(&self.problem.syndrome(&c), syndrome);
        Ok(self.problem.finish(c, converged))
    }

    /// True when decoding `H e` yields a correction of different action.
    pub fn is_failure(&self, sys: &DecodingSystem, e: &BitVec) -> Result<bool> {
        let d = self.decode(&sys.syndrome(e))?;
        Ok(sys.action(&d.correction) != sys.action(e))
    }
}

/// One-shot decode.
pub fn decode(sys: &DecodingSystem, cfg: &DecoderConfig, syndrome: &BitVec) -> Result<Decoding> {
    Decoder::new(sys, cfg)?.decode(syndrome)
}

/// One-shot failure test.
pub fn is_failure(sys: &DecodingSystem, cfg: &DecoderConfig, e: &BitVec) -> Result<bool> {
    if e.len() != sys.num_faults() {
        return Err(Error::dim("error length differs from column count"));
    }
    Decoder::new(sys, cfg)?.is_failure(sys, e)
}

/// Decodes the system with `extra_row` appended and its syndrome bit set to
/// one. With `forced_odd_support`, the bits of `supp(extra_row)` are fixed
/// (listed ones to 1, the rest to 0) and only the residual is decoded.
pub fn decode_bb(
    sys: &DecodingSystem,
    cfg: &DecoderConfig,
    syndrome: &BitVec,
    extra_row: &BitVec,
    forced_odd_support: Option<&[usize]>,
) -> Result<Decoding> {
    decode_bb_problem(&Problem::from_system(sys, cfg)?, cfg, syndrome, extra_row, forced_odd_support)
}

pub fn decode_bb_problem(
    base: &Problem,
    cfg: &DecoderConfig,
    syndrome: &BitVec,
    extra_row: &BitVec,
    forced_odd_support: Option<&[usize]>,
) -> Result<Decoding> {
    let n = base.num_cols();
    if extra_row.len() != n || syndrome.len() != base.num_checks() {
        return Err(Error::dim("extra row or syndrome has the wrong length"));
    }
    match forced_odd_support {
        None => {
            let stacked = base.with_row(extra_row)?;
            let s = syndrome.pushed(true);
            Decoder::for_problem(stacked, cfg)?.decode(&s)
        }
        Some(forced) => {
            if forced.len() % 2 == 0 || forced.iter().any(|&j| j >= n || !extra_row.get(j)) {
                return Err(Error::invalid("forced support must be an odd subset of the extra row"));
            }
            let mut residual = syndrome.clone();
            for &j in forced {
                residual.xor_assign(&base.h_cols[j]);
            }
            let free: Vec<usize> = (0..n).filter(|&j| !extra_row.get(j)).collect();
            let sub = base.select_columns(&free)?;
            let inner = Decoder::for_problem(sub, cfg)?.decode(&residual)?;
            let mut c = BitVec::from_indices(n, forced);
            for k in inner.correction.iter_ones() {
                c.set(free[k], true);
            }
            let converged = inner.converged;
            Ok(base.finish(c, converged))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{gen_repetition, gen_rotated_toric, gen_unrotated_toric};

    fn all_vectors(n: usize) -> impl Iterator<Item = BitVec> {
        (0u32..(1 << n)).map(move |mask| BitVec::from_bools(&(0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>()))
    }

    fn backends() -> [DecoderConfig; 3] {
        [
            DecoderConfig::with_backend(Backend::Lookup),
            DecoderConfig::with_backend(Backend::BranchAndBound),
            DecoderConfig::with_backend(Backend::BpOsd0),
        ]
    }

    #[test]
    fn zero_syndrome_gives_zero_correction() {
        let sys = gen_unrotated_toric(3, 3).unwrap();
        for cfg in backends() {
            let d = decode(&sys, &cfg, &BitVec::zeros(sys.num_checks())).unwrap();
            assert!(d.correction.is_zero());
        }
    }

    #[test]
    fn repetition_single_fault() {
        let sys = gen_repetition(5).unwrap();
        let s = BitVec::from_bitstr("0110").unwrap();
        // Brute force: the unique weight-1 solution is 00100.
        let best = all_vectors(5)
            .filter(|v| sys.syndrome(v) == s)
            .min_by_key(BitVec::weight)
            .unwrap();
        assert_eq!(best.to_bitstr(), "00100");
        for cfg in backends() {
            let d = decode(&sys, &cfg, &s).unwrap();
            assert_eq!(d.correction, best);
            assert_eq!(d.weight, 1);
        }
    }

    #[test]
    fn toric_single_faults_decode_to_weight_one() {
        let sys = gen_unrotated_toric(4, 4).unwrap();
        for cfg in backends() {
            let dec = Decoder::new(&sys, &cfg).unwrap();
            for j in 0..32 {
                let e = BitVec::from_indices(32, &[j]);
                let d = dec.decode(&sys.syndrome(&e)).unwrap();
                assert_eq!(d.weight, 1);
                assert_eq!(sys.syndrome(&d.correction), sys.syndrome(&e));
            }
        }
    }

    #[test]
    fn repetition_failures() {
        let sys = gen_repetition(5).unwrap();
        let cfg = DecoderConfig::default();
        assert!(!is_failure(&sys, &cfg, &BitVec::zeros(5)).unwrap());
        assert!(is_failure(&sys, &cfg, &BitVec::from_bitstr("11100").unwrap()).unwrap());
        assert!(!is_failure(&sys, &cfg, &BitVec::from_bitstr("11000").unwrap()).unwrap());
    }

    #[test]
    fn infeasible_syndrome_is_an_error() {
        let h = BitMatrix::from_bitstrs(&["110", "110"]).unwrap();
        let a = BitMatrix::from_bitstrs(&["111"]).unwrap();
        let sys = DecodingSystem::new("dep", h, a, vec![1; 3], 1.0).unwrap();
        let s = BitVec::from_bitstr("10").unwrap();
        for cfg in backends() {
            assert!(matches!(decode(&sys, &cfg, &s), Err(Error::Infeasible)));
        }
    }

    #[test]
    fn bnb_budget_is_distinct_error() {
        let sys = gen_unrotated_toric(4, 4).unwrap();
        let cfg = DecoderConfig {
            backend: Backend::BranchAndBound,
            node_budget: 3,
            ..DecoderConfig::default()
        };
        let e = BitVec::from_indices(32, &[0, 5, 17]);
        assert!(matches!(decode(&sys, &cfg, &sys.syndrome(&e)), Err(Error::BudgetExhausted(_))));
    }

    /// Exhaustive agreement of lookup and branch-and-bound, compared to the
    /// brute-force minimum, on every syndrome of small systems.
    #[test]
    fn backends_agree_exhaustively() {
        let systems = vec![
            gen_repetition(5).unwrap(),
            gen_repetition(7).unwrap(),
            gen_unrotated_toric(2, 2).unwrap(),
            gen_unrotated_toric(2, 3).unwrap(),
            gen_rotated_toric(4).unwrap(),
        ];
        for sys in systems {
            let n = sys.num_faults();
            let mut brute: std::collections::HashMap<BitVec, BitVec> = std::collections::HashMap::new();
            for v in all_vectors(n) {
                let s = sys.syndrome(&v);
                let better = match brute.get(&s) {
                    None => true,
                    Some(b) => v.weight() < b.weight() || (v.weight() == b.weight() && v.support_cmp(b).is_lt()),
                };
                if better {
                    brute.insert(s, v);
                }
            }
            let lookup = Decoder::new(&sys, &DecoderConfig::with_backend(Backend::Lookup)).unwrap();
            let bnb = Decoder::new(&sys, &DecoderConfig::with_backend(Backend::BranchAndBound)).unwrap();
            let bp = Decoder::new(&sys, &DecoderConfig::with_backend(Backend::BpOsd0)).unwrap();
            for (s, best) in &brute {
                let l = lookup.decode(s).unwrap();
                let b = bnb.decode(s).unwrap();
                assert_eq!(l.correction, *best, "{} lookup", sys.label());
                assert_eq!(b.correction, *best, "{} bnb", sys.label());
                let p = bp.decode(s).unwrap();
                assert_eq!(&sys.syndrome(&p.correction), s);
            }
        }
    }

    #[test]
    fn weighted_costs_change_the_choice() {
        let sys = gen_repetition(3).unwrap();
        // Column 0 is very unlikely: decoding 10 prefers flipping 1 and 2.
        let cfg = DecoderConfig {
            priors: Some(vec![1e-6, 0.1, 0.1]),
            ..DecoderConfig::default()
        };
        let s = BitVec::from_bitstr("10").unwrap();
        for backend in [Backend::Lookup, Backend::BranchAndBound] {
            let d = decode(&sys, &DecoderConfig { backend, ..cfg.clone() }, &s).unwrap();
            assert_eq!(d.correction.to_bitstr(), "011");
        }
    }

    #[test]
    fn decode_bb_examples() {
        let sys = gen_repetition(5).unwrap();
        let zero = BitVec::zeros(4);
        for cfg in backends() {
            let d = decode_bb(&sys, &cfg, &zero, &BitVec::ones(5), None).unwrap();
            assert_eq!(d.weight, 5);
            assert!(sys.is_logical(&d.correction));
        }
        let ut = gen_unrotated_toric(4, 4).unwrap();
        let row0 = ut.a().row(0).clone();
        let cfg = DecoderConfig::with_backend(Backend::BranchAndBound);
        let d = decode_bb(&ut, &cfg, &BitVec::zeros(16), &row0, None).unwrap();
        assert!(ut.syndrome(&d.correction).is_zero());
        assert!(d.correction.dot(&row0));
        assert_eq!(d.weight, 4);
        let first = row0.first_one().unwrap();
        let d = decode_bb(&ut, &cfg, &BitVec::zeros(16), &row0, Some(&[first])).unwrap();
        assert!(d.correction.get(first));
        assert_eq!(d.correction.and_weight(&row0), 1);
        assert!(ut.is_logical(&d.correction));
        assert_eq!(d.weight, 4);
    }

    #[test]
    fn decode_is_deterministic() {
        let sys = gen_unrotated_toric(3, 5).unwrap();
        let e = BitVec::from_indices(30, &[1, 7, 12, 20]);
        for cfg in backends() {
            let a = decode(&sys, &cfg, &sys.syndrome(&e)).unwrap();
            let b = decode(&sys, &cfg, &sys.syndrome(&e)).unwrap();
            assert_eq!(a, b);
        }
    }
}
