use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{run_chain, ChainParams, ChainRecord};
use super::ratio::{estimate_ratio, RatioEstimate};
use super::schedule::RateSchedule;
use crate::decoders::Decoder;
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::rng::{child_seed, stream};
use crate::sampling::{read_schema_csv, sample_rate_until, write_schema_csv, RateSampler};
use crate::system::DecodingSystem;

/// Label recorded for the endpoint convention: a missing neighbour is the
/// endpoint itself, so its kernel is constant and ignored.
pub const BOUNDARY_CONVENTION: &str = "clamped";

/// How chains are initialised.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// Monte Carlo failing configurations at `p0`; later chains start from
    /// the final configuration of their predecessor.
    #[default]
    MonteCarlo,
    /// Every chain starts from this configuration.
    Fixed(BitVec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitOptions {
    pub p0: f64,
    pub targets: Vec<f64>,
    /// Distance used by the schedule rule.
    pub distance: usize,
    pub l: usize,
    pub m: usize,
    pub chain: ChainParams,
    /// Direct-sampling failure target for `P(p0)`.
    pub p0_failures: u64,
    pub p0_max_trials: u64,
    /// Caller-supplied `(P(p0), stderr)`, skipping direct sampling.
    pub p0_estimate: Option<(f64, f64)>,
    pub seeding: Seeding,
    pub budget: Option<Duration>,
}

impl SplitOptions {
    pub fn new(p0: f64, targets: Vec<f64>, distance: usize) -> Self {
        Self {
            p0,
            targets,
            distance,
            l: 1,
            m: 1,
            chain: ChainParams::default(),
            p0_failures: 1000,
            p0_max_trials: 1 << 40,
            p0_estimate: None,
            seeding: Seeding::MonteCarlo,
            budget: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitProvenance {
    pub l: usize,
    pub m: usize,
    pub t_init: u64,
    pub epsilon: f64,
    pub lambda: f64,
    pub seed_index: usize,
    pub repetition: usize,
    pub boundary: String,
}

/// One instance's estimate at a target rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEstimate {
    pub p_target: f64,
    pub p_hat: f64,
    /// Ratios applied from `p0` to the target, in order.
    pub ratios: Vec<RatioEstimate>,
    pub provenance: SplitProvenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub p: f64,
    pub samples: u64,
    pub transitions: u64,
    pub transition_rate: f64,
    pub decoder_calls: u64,
    pub decoder_call_rate: f64,
    pub cache_hits: u64,
    pub mean_weight: f64,
    pub histogram: BTreeMap<u64, u64>,
    pub wall_seconds: f64,
    pub partial: bool,
}

/// Per-chain rates, weight histograms, lengths and timings.
pub fn chain_diagnostics(records: &[ChainRecord]) -> Vec<ChainDiagnostics> {
    records
        .iter()
        .map(|r| {
            let t = r.samples.max(1) as f64;
            let weight_sum: f64 = r.histogram.iter().map(|(&w, &k)| w as f64 * k as f64).sum();
            ChainDiagnostics {
                p: r.p,
                samples: r.samples,
                transitions: r.transitions,
                transition_rate: r.transitions as f64 / t,
                decoder_calls: r.decoder_calls,
                decoder_call_rate: r.decoder_calls as f64 / t,
                cache_hits: r.cache_hits,
                mean_weight: if r.samples > 0 { weight_sum / t } else { f64::NAN },
                histogram: r.histogram.clone(),
                wall_seconds: r.wall_seconds,
                partial: r.partial,
            }
        })
        .collect()
}

/// Chains of one (seed, repetition) pair along the whole schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInstance {
    pub seed_index: usize,
    pub repetition: usize,
    /// `P̂` at every schedule point.
    pub p_hat: Vec<f64>,
    /// `P(p_{i+1}) / P(p_i)` for each adjacent pair.
    pub ratios: Vec<RatioEstimate>,
    pub chains: Vec<ChainDiagnostics>,
    pub partial: bool,
}

/// Aggregate over instances at one schedule point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub p: f64,
    pub p_hat: f64,
    /// Standard deviation of the instance estimates.
    pub p_std: f64,
    pub mean_weight: f64,
    pub transition_rate: f64,
    pub decoder_call_rate: f64,
    pub histogram: BTreeMap<u64, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRun {
    pub schedule: RateSchedule,
    pub targets: Vec<f64>,
    pub p0_hat: f64,
    pub p0_stderr: f64,
    pub boundary: String,
    pub instances: Vec<SplitInstance>,
    pub rates: Vec<RateSummary>,
    pub l: usize,
    pub m: usize,
    pub t_init: u64,
    pub epsilon: f64,
    pub lambda: f64,
}

impl SplitRun {
    /// One estimate per instance and target.
    pub fn estimates(&self) -> Vec<SplitEstimate> {
        let o = self.schedule.origin;
        let mut out = Vec::new();
        for inst in &self.instances {
            for &t in &self.targets {
                let Some(k) = self.schedule.index_of(t) else { continue };
                let ratios = if k >= o { inst.ratios[o..k].to_vec() } else { inst.ratios[k..o].iter().rev().copied().collect() };
                out.push(SplitEstimate {
                    p_target: t,
                    p_hat: inst.p_hat[k],
                    ratios,
                    provenance: SplitProvenance {
                        l: self.l,
                        m: self.m,
                        t_init: self.t_init,
                        epsilon: self.epsilon,
                        lambda: self.lambda,
                        seed_index: inst.seed_index,
                        repetition: inst.repetition,
                        boundary: self.boundary.clone(),
                    },
                });
            }
        }
        out
    }

    pub fn summary_at(&self, p: f64) -> Option<&RateSummary> {
        self.rates.iter().find(|r| r.p == p)
    }
}

/// Failing configurations from direct sampling at `p`, one per stream.
pub fn sample_failing_configs(
    sys: &DecodingSystem,
    decoder: &Decoder,
    p: f64,
    count: usize,
    max_trials: u64,
    seed: u64,
) -> Result<Vec<BitVec>> {
    let sampler = RateSampler::new(sys, p)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            for _ in 0..max_trials {
                let (e, _) = sampler.draw(&mut rng);
                if !e.is_zero() && decoder.is_failure(sys, &e)? {
                    return Ok(e);
                }
            }
            Err(Error::BudgetExhausted(format!("no failing configuration at p = {p} in {max_trials} trials")))
        })
        .collect()
}

fn run_instance(
    sys: &DecodingSystem,
    decoder: &Decoder,
    schedule: &RateSchedule,
    seed: &BitVec,
    fixed: bool,
    params: &ChainParams,
    stream_seed: u64,
) -> Result<Vec<ChainRecord>> {
    let o = schedule.origin;
    let chain = |j: usize, from: &BitVec, idx: u64| {
        run_chain(sys, decoder, j, from, schedule, schedule.sequence_len(j), params, &mut stream(stream_seed, idx))
    };
    let zeroth = chain(o, seed, o as u64)?;
    let (down, up) = rayon::join(
        || -> Result<Vec<ChainRecord>> {
            let mut out: Vec<ChainRecord> = Vec::new();
            for j in o + 1..schedule.len() {
                let from = if fixed { seed } else { &out.last().unwrap_or(&zeroth).final_config };
                let rec = chain(j, from, j as u64)?;
                out.push(rec);
            }
            Ok(out)
        },
        || -> Result<Vec<ChainRecord>> {
            let mut out: Vec<ChainRecord> = Vec::new();
            for j in (0..o).rev() {
                let from = if fixed { seed } else { &out.last().unwrap_or(&zeroth).final_config };
                let rec = chain(j, from, j as u64)?;
                out.push(rec);
            }
            Ok(out)
        },
    );
    let mut all: Vec<ChainRecord> = up?.into_iter().rev().collect();
    all.push(zeroth);
    all.extend(down?);
    Ok(all)
}

/// Ratio between adjacent chains, undefined (NaN) when a budget-stopped
/// chain has no samples.
fn instance_ratio(prev: &ChainRecord, next: &ChainRecord) -> Result<RatioEstimate> {
    if prev.samples == 0 || next.samples == 0 {
        return Ok(RatioEstimate { p_from: prev.p, p_to: next.p, r: f64::NAN, stderr: f64::NAN, c: f64::NAN });
    }
    estimate_ratio(prev, next)
}

/// `P̂` along the schedule from `P(p0)` and the adjacent ratios.
fn chain_products(origin: usize, p0_hat: f64, ratios: &[RatioEstimate]) -> Vec<f64> {
    let mut p = vec![0.0; ratios.len() + 1];
    p[origin] = p0_hat;
    for i in origin..ratios.len() {
        p[i + 1] = p[i] * ratios[i].r;
    }
    for i in (0..origin).rev() {
        p[i] = p[i + 1] / ratios[i].r;
    }
    p
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// `L` seeds times `M` repetitions of splitting from `p0` through every
/// target. Each instance runs its zeroth chain at `p0`, then the
/// downward and upward sequences concurrently.
pub fn multi_seeded_split<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    decoder: &Decoder,
    opts: &SplitOptions,
    rng: &mut R,
) -> Result<SplitRun> {
    if opts.l == 0 || opts.m == 0 {
        return Err(Error::invalid("L and M must be positive"));
    }
    let schedule = RateSchedule::through(opts.p0, &opts.targets, opts.distance, sys.expanded_count())?;
    let master = child_seed(rng);
    let mut params = opts.chain.clone();
    if let Some(b) = opts.budget {
        params.deadline = Some(Instant::now() + b);
    }
    let (p0_hat, p0_stderr) = match opts.p0_estimate {
        Some(e) => e,
        None => {
            let est = sample_rate_until(sys, decoder, opts.p0, opts.p0_failures, opts.p0_max_trials, &mut stream(master, 0))?;
            if est.failures == 0 {
                return Err(Error::BudgetExhausted(format!("no failures at p0 = {} in {} trials", opts.p0, est.trials)));
            }
            (est.phat(), est.stderr())
        }
    };
    let (seeds, fixed) = match &opts.seeding {
        Seeding::MonteCarlo => {
            let s = child_seed(&mut stream(master, 1));
            (sample_failing_configs(sys, decoder, opts.p0, opts.l, opts.p0_max_trials, s)?, false)
        }
        Seeding::Fixed(e) => (vec![e.clone(); opts.l], true),
    };
    let chain_seed = child_seed(&mut stream(master, 2));
    let instances: Vec<SplitInstance> = (0..opts.l * opts.m)
        .into_par_iter()
        .map(|k| {
            let (li, mi) = (k / opts.m, k % opts.m);
            let s = child_seed(&mut stream(chain_seed, k as u64));
            let records = run_instance(sys, decoder, &schedule, &seeds[li], fixed, &params, s)?;
            let ratios: Vec<RatioEstimate> =
                records.windows(2).map(|w| instance_ratio(&w[0], &w[1])).collect::<Result<_>>()?;
            Ok(SplitInstance {
                seed_index: li,
                repetition: mi,
                p_hat: chain_products(schedule.origin, p0_hat, &ratios),
                partial: records.iter().any(|r| r.partial),
                ratios,
                chains: chain_diagnostics(&records),
            })
        })
        .collect::<Result<_>>()?;
    let rates = (0..schedule.len())
        .map(|i| {
            let est: Vec<f64> = instances.iter().map(|x| x.p_hat[i]).filter(|v| v.is_finite()).collect();
            let (p_hat, p_std) = if est.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&est) };
            let mut histogram = BTreeMap::new();
            let (mut t, mut tr, mut dc, mut ws) = (0u64, 0u64, 0u64, 0.0);
            for inst in &instances {
                let c = &inst.chains[i];
                for (&w, &k) in &c.histogram {
                    *histogram.entry(w).or_insert(0) += k;
                    ws += w as f64 * k as f64;
                }
                t += c.samples;
                tr += c.transitions;
                dc += c.decoder_calls;
            }
            let tf = t.max(1) as f64;
            RateSummary {
                p: schedule.p_values[i],
                p_hat,
                p_std,
                mean_weight: ws / tf,
                transition_rate: tr as f64 / tf,
                decoder_call_rate: dc as f64 / tf,
                histogram,
            }
        })
        .collect();
    Ok(SplitRun {
        targets: opts.targets.clone(),
        schedule,
        p0_hat,
        p0_stderr,
        boundary: BOUNDARY_CONVENTION.to_owned(),
        instances,
        rates,
        l: opts.l,
        m: opts.m,
        t_init: opts.chain.t_init,
        epsilon: opts.chain.epsilon,
        lambda: opts.chain.lambda,
    })
}

pub const SPLIT_CSV_HEADER: [&str; 6] = ["p", "P_hat", "P_std", "mean_weight", "transition_rate", "decoder_call_rate"];

/// Per-rate summary CSV, ordered by decreasing `p`.
pub fn write_split_csv<W: Write>(rates: &[RateSummary], out: W) -> Result<()> {
    let rows = rates.iter().map(|r| {
        [r.p, r.p_hat, r.p_std, r.mean_weight, r.transition_rate, r.decoder_call_rate]
            .iter()
            .map(|x| format!("{x:e}"))
            .collect()
    });
    write_schema_csv(out, &SPLIT_CSV_HEADER, rows)
}

/// Reads [`write_split_csv`] output; histograms are not part of the CSV.
pub fn read_split_csv<R: Read>(input: R) -> Result<Vec<RateSummary>> {
    read_schema_csv(input, &SPLIT_CSV_HEADER)?
        .into_iter()
        .map(|row| {
            let v: Vec<f64> = row
                .iter()
                .map(|s| s.parse().map_err(|_| Error::invalid(format!("expected a number, found {s:?}"))))
                .collect::<Result<_>>()?;
            Ok(RateSummary {
                p: v[0],
                p_hat: v[1],
                p_std: v[2],
                mean_weight: v[3],
                transition_rate: v[4],
                decoder_call_rate: v[5],
                histogram: BTreeMap::new(),
            })
        })
        .collect()
}
