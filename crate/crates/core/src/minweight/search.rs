use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logicals::{LogicalSet, Provenance};
use crate::decoders::{decode_bb_problem, Backend, DecoderConfig, Problem, DEFAULT_PRIOR_RATE};
use crate::error::{Error, Result};
use crate::f2linalg::{sample_span, BitVec};
use crate::rng::{child_seed, stream};
use crate::system::DecodingSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub distance: usize,
    /// Distinct weight-`distance` logicals found on the way.
    pub witnesses: Vec<BitVec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    /// Smallest witness weight, `None` when every decode failed.
    pub distance: Option<usize>,
    pub witnesses: Vec<BitVec>,
    pub failed_decodes: u64,
}

fn unit_cost(cfg: &DecoderConfig) -> Result<DecoderConfig> {
    if cfg.backend == Backend::BpOsd0 {
        return Err(Error::invalid("exact distance needs a min-weight decoder backend"));
    }
    Ok(DecoderConfig { priors: None, ..cfg.clone() })
}

fn dedup_min(found: Vec<BitVec>) -> (Option<usize>, Vec<BitVec>) {
    let d = found.iter().map(BitVec::weight).min();
    let mut w: Vec<BitVec> = found.into_iter().filter(|l| Some(l.weight()) == d).collect();
    w.sort_by(|a, b| a.support_cmp(b));
    w.dedup();
    (d, w)
}

/// Exact distance: for each action row, the cheapest correction of the
/// check matrix stacked with that row, for the syndrome with only the
/// appended bit set.
pub fn distance_exact(sys: &DecodingSystem, cfg: &DecoderConfig) -> Result<DistanceResult> {
    let cfg = unit_cost(cfg)?;
    let base = Problem::from_system(sys, &cfg)?;
    let zero = BitVec::zeros(sys.num_checks());
    let mut found = Vec::new();
    for i in 0..sys.num_actions() {
        match decode_bb_problem(&base, &cfg, &zero, sys.a().row(i), None) {
            Ok(d) => {
                debug_assert!(sys.is_logical(&d.correction));
                found.push(d.correction);
            }
            Err(Error::Infeasible) => {}
            Err(Error::BudgetExhausted(m)) => return Err(Error::BudgetExhausted(format!("action row {i}: {m}"))),
            Err(e) => return Err(e),
        }
    }
    match dedup_min(found) {
        (Some(distance), witnesses) => Ok(DistanceResult { distance, witnesses }),
        (None, _) => Err(Error::Infeasible),
    }
}

pub(crate) struct Spans {
    h: Vec<BitVec>,
    a: Vec<BitVec>,
    n: usize,
}

impl Spans {
    pub(crate) fn new(sys: &DecodingSystem) -> Result<Self> {
        let a = sys.a().row_basis();
        if a.is_empty() {
            return Err(Error::invalid("system has no nonzero action rows"));
        }
        Ok(Self { h: sys.h().row_basis(), a, n: sys.num_faults() })
    }

    /// `h + l` with `h` uniform in the row space of `H` and `l` uniform
    /// among nonzero elements of the row space of `A`.
    pub(crate) fn constraint<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        let mut l = sample_span(&self.a, self.n, rng);
        while l.is_zero() {
            l = sample_span(&self.a, self.n, rng);
        }
        l.xor(&sample_span(&self.h, self.n, rng))
    }
}

/// Randomized distance upper bound from `trials` stacked decodes with
/// random constraints.
pub fn distance_upper_bound<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    cfg: &DecoderConfig,
    trials: usize,
    rng: &mut R,
) -> Result<UpperBound> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let spans = Spans::new(sys)?;
    let base = Problem::from_system(sys, cfg)?;
    let zero = BitVec::zeros(sys.num_checks());
    let seed = child_seed(rng);
    let outcomes: Vec<Option<BitVec>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = stream(seed, t as u64);
            let g = spans.constraint(&mut r);
            decode_bb_problem(&base, cfg, &zero, &g, None)
                .ok()
                .map(|d| d.correction)
                .filter(|c| sys.is_logical(c))
        })
        .collect();
    let failed_decodes = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let (distance, witnesses) = dedup_min(outcomes.into_iter().flatten().collect());
    Ok(UpperBound { distance, witnesses, failed_decodes })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Fix a random low odd-weight assignment on the constraint support
    /// and decode only the residual.
    pub decimation: bool,
    /// Multiply each column prior by an independent factor in `[0.5, 2]`
    /// each round.
    pub prior_perturbation: bool,
    /// Columns forced to zero.
    pub restrict_columns: Vec<usize>,
}

struct Searcher<'a> {
    sys: &'a DecodingSystem,
    cfg: &'a DecoderConfig,
    spans: Spans,
    base_priors: Vec<f64>,
    allowed: Vec<usize>,
    fixed_problem: Option<Problem>,
    opts: &'a SearchOptions,
}

impl<'a> Searcher<'a> {
    fn new(sys: &'a DecodingSystem, cfg: &'a DecoderConfig, opts: &'a SearchOptions) -> Result<Self> {
        let n = sys.num_faults();
        if opts.restrict_columns.iter().any(|&j| j >= n) {
            return Err(Error::dim("restricted column out of range"));
        }
        let allowed: Vec<usize> = (0..n).filter(|j| !opts.restrict_columns.contains(j)).collect();
        let base_priors = cfg.priors.clone().unwrap_or_else(|| sys.fault_probabilities(DEFAULT_PRIOR_RATE));
        let fixed_problem = if opts.prior_perturbation {
            None
        } else {
            Some(Problem::from_system(sys, cfg)?.select_columns(&allowed)?)
        };
        Ok(Self { sys, cfg, spans: Spans::new(sys)?, base_priors, allowed, fixed_problem, opts })
    }

    fn round<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(BitVec, Provenance)> {
        let (cfg, perturbed);
        let problem = match &self.fixed_problem {
            Some(p) => {
                cfg = self.cfg.clone();
                p
            }
            None => {
                let priors: Vec<f64> = self
                    .base_priors
                    .iter()
                    .map(|&p| (p * rng.gen_range(0.5..=2.0)).clamp(1e-12, 0.49))
                    .collect();
                cfg = DecoderConfig { priors: Some(priors), ..self.cfg.clone() };
                perturbed = Problem::from_system(self.sys, &cfg).ok()?.select_columns(&self.allowed).ok()?;
                &perturbed
            }
        };
        let g = self.spans.constraint(rng).select(&self.allowed);
        let support = g.support();
        if support.is_empty() {
            return None;
        }
        let zero = BitVec::zeros(self.sys.num_checks());
        let (forced, prov) = if self.opts.decimation {
            let ks: Vec<usize> = [1usize, 3, 5].into_iter().filter(|&k| k <= support.len()).collect();
            let weights: Vec<f64> = ks.iter().map(|&k| 0.5f64.powi(k as i32)).collect();
            let k = ks[WeightedIndex::new(&weights).ok()?.sample(rng)];
            let mut pick: Vec<usize> = rand::seq::index::sample(rng, support.len(), k).into_iter().map(|i| support[i]).collect();
            pick.sort_unstable();
            (Some(pick), Provenance::Decimation)
        } else {
            (None, Provenance::Search)
        };
        let d = decode_bb_problem(problem, &cfg, &zero, &g, forced.as_deref()).ok()?;
        let mut full = BitVec::zeros(self.sys.num_faults());
        for k in d.correction.iter_ones() {
            full.set(self.allowed[k], true);
        }
        self.sys.is_logical(&full).then_some((full, prov))
    }
}

/// Result of a logical search, with the number of distinct target-weight
/// logicals known after each round.
#[derive(Clone, Debug)]
pub struct SearchReport {
    pub set: LogicalSet,
    pub unique_after_round: Vec<usize>,
}

/// Repeated randomized stacked decodes, keeping the verified logicals of
/// weight `target` (or of the smallest weight seen when `None`).
pub fn search_logicals_report<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    cfg: &DecoderConfig,
    target: Option<usize>,
    rounds: usize,
    opts: &SearchOptions,
    rng: &mut R,
) -> Result<SearchReport> {
    let searcher = Searcher::new(sys, cfg, opts)?;
    let seed = child_seed(rng);
    let found: Vec<Option<(BitVec, Provenance)>> = (0..rounds)
        .into_par_iter()
        .map(|r| searcher.round(&mut stream(seed, r as u64)))
        .collect();
    let weight = match target {
        Some(w) => w,
        None => found
            .iter()
            .flatten()
            .map(|(l, _)| l.weight())
            .min()
            .ok_or_else(|| Error::invalid("search found no logicals"))?,
    };
    let mut set = LogicalSet::new(weight, sys.num_faults());
    let mut unique_after_round = Vec::with_capacity(rounds);
    for round in found {
        if let Some((l, prov)) = round {
            if l.weight() == weight {
                set.insert_verified(l, prov);
            }
        }
        unique_after_round.push(set.len());
    }
    Ok(SearchReport { set, unique_after_round })
}

pub fn search_logicals<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    cfg: &DecoderConfig,
    target: Option<usize>,
    rounds: usize,
    opts: &SearchOptions,
    rng: &mut R,
) -> Result<LogicalSet> {
    Ok(search_logicals_report(sys, cfg, target, rounds, opts, rng)?.set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub fraction: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Fraction of freshly found weight-`found.weight()` logicals already in
/// `found`. Fresh logicals come from independent perturbed-prior searches.
pub fn coverage_estimate<R: Rng + ?Sized>(
    found: &LogicalSet,
    sys: &DecodingSystem,
    cfg: &DecoderConfig,
    fresh: usize,
    rng: &mut R,
) -> Result<Coverage> {
    if fresh == 0 {
        return Err(Error::invalid("at least one fresh sample is required"));
    }
    if found.is_empty() {
        return Ok(Coverage { fraction: 0.0, stderr: 0.0, samples: 0 });
    }
    let opts = SearchOptions { prior_perturbation: true, ..SearchOptions::default() };
    let searcher = Searcher::new(sys, cfg, &opts)?;
    let seed = child_seed(rng);
    let weight = found.weight();
    let (mut hits, mut samples, mut next) = (0usize, 0usize, 0u64);
    let max_rounds = 1000 * fresh as u64;
    while samples < fresh && next < max_rounds {
        let batch = (2 * (fresh - samples)) as u64;
        let got: Vec<BitVec> = (next..next + batch)
            .into_par_iter()
            .filter_map(|r| searcher.round(&mut stream(seed, r)).map(|(l, _)| l))
            .filter(|l| l.weight() == weight)
            .collect();
        next += batch;
        for l in got.into_iter().take(fresh - samples) {
            samples += 1;
            hits += usize::from(found.contains(&l));
        }
    }
    if samples == 0 {
        return Err(Error::BudgetExhausted(format!("no weight-{weight} logicals found in {max_rounds} rounds")));
    }
    let f = hits as f64 / samples as f64;
    Ok(Coverage { fraction: f, stderr: (f * (1.0 - f) / samples as f64).sqrt(), samples })
}
