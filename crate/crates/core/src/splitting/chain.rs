use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::time::Instant;

use lru::LruCache;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pi::PiTable;
use super::schedule::RateSchedule;
use crate::decoders::{Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::system::DecodingSystem;

/// Failure test with a bounded syndrome → correction-action cache.
pub struct FailureOracle<'a> {
    sys: &'a DecodingSystem,
    decoder: &'a Decoder,
    cache: Option<LruCache<BitVec, BitVec>>,
    pub calls: u64,
    pub hits: u64,
}

impl<'a> FailureOracle<'a> {
    /// `capacity == 0` disables caching.
    pub fn new(sys: &'a DecodingSystem, decoder: &'a Decoder, capacity: usize) -> Self {
        let cache = NonZeroUsize::new(capacity).map(LruCache::new);
        Self { sys, decoder, cache, calls: 0, hits: 0 }
    }

    /// Whether an error with this syndrome and action defeats the decoder.
    pub fn fails(&mut self, syndrome: &BitVec, action: &BitVec) -> Result<bool> {
        self.calls += 1;
        if let Some(cache) = &mut self.cache {
            if let Some(a) = cache.get(syndrome) {
                self.hits += 1;
                return Ok(a != action);
            }
        }
        let a = self.sys.action(&self.decoder.decode(syndrome)?.correction);
        let fails = &a != action;
        if let Some(cache) = &mut self.cache {
            cache.put(syndrome.clone(), a);
        }
        Ok(fails)
    }

    pub fn is_failure(&mut self, e: &BitVec) -> Result<bool> {
        self.fails(&self.sys.syndrome(e), &self.sys.action(e))
    }
}

/// Outcome of one Metropolis step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// Rejected by the probability ratio test.
    Rejected,
    /// Proposal passed the ratio test but was not failing.
    NotFailing,
    /// Moved by flipping this bit.
    Moved(usize),
}

/// A failing configuration with its syndrome and action kept current.
pub struct ChainState {
    e: BitVec,
    syndrome: BitVec,
    action: BitVec,
}

impl ChainState {
    pub fn new(sys: &DecodingSystem, e: BitVec) -> Self {
        Self { syndrome: sys.syndrome(&e), action: sys.action(&e), e }
    }

    pub fn config(&self) -> &BitVec {
        &self.e
    }

    pub fn into_config(self) -> BitVec {
        self.e
    }
}

/// One step in the fixed order: flip a uniform bit, accept with
/// `min(1, π(E')/π(E))`, then keep the proposal only if it is failing.
pub fn metropolis_update<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    pi: &PiTable,
    oracle: &mut FailureOracle,
    state: &mut ChainState,
    rng: &mut R,
) -> Result<Step> {
    let j = rng.gen_range(0..sys.num_faults());
    let dlog = pi.flip_delta(&state.e, j);
    if dlog < 0.0 && rng.gen::<f64>() >= dlog.exp() {
        return Ok(Step::Rejected);
    }
    let syn = state.syndrome.xor(sys.h_column(j));
    let act = state.action.xor(sys.a_column(j));
    if oracle.fails(&syn, &act)? {
        state.e.flip(j);
        state.syndrome = syn;
        state.action = act;
        Ok(Step::Moved(j))
    } else {
        Ok(Step::NotFailing)
    }
}

/// Single Metropolis step from failing `e` at rate `p`.
pub fn metropolis_step<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    cfg: &DecoderConfig,
    e: &BitVec,
    p: f64,
    rng: &mut R,
) -> Result<BitVec> {
    let decoder = Decoder::new(sys, cfg)?;
    let mut oracle = FailureOracle::new(sys, &decoder, 0);
    if e.len() != sys.num_faults() {
        return Err(Error::dim("configuration length differs from column count"));
    }
    if !oracle.is_failure(e)? {
        return Err(Error::invalid("Metropolis step needs a failing configuration"));
    }
    let pi = PiTable::new(sys, p)?;
    let mut state = ChainState::new(sys, e.clone());
    metropolis_update(sys, &pi, &mut oracle, &mut state, rng)?;
    Ok(state.into_config())
}

/// Closed-form probability that one step moves `e` to `e2`, for distinct
/// configurations differing in one bit. Zero otherwise.
pub fn transition_probability(
    sys: &DecodingSystem,
    pi: &PiTable,
    oracle: &mut FailureOracle,
    e: &BitVec,
    e2: &BitVec,
) -> Result<f64> {
    let diff = e.xor(e2);
    if diff.weight() != 1 {
        return Ok(0.0);
    }
    let j = diff.first_one().expect("weight one");
    if !oracle.is_failure(e2)? {
        return Ok(0.0);
    }
    let accept = pi.flip_delta(e, j).min(0.0).exp();
    Ok(accept / sys.num_faults() as f64)
}

/// `g(e^y) = 1 / (1 + e^y)` with `y` clamped to `±700`.
pub fn g_kernel(y: f64) -> f64 {
    1.0 / (1.0 + y.clamp(-700.0, 700.0).exp())
}

/// Mean, sample variance and first-half mean of the first `t` kernel values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelStats {
    pub mean: f64,
    pub variance: f64,
    pub half_mean: f64,
}

impl KernelStats {
    pub fn of(ln_ratios: &[f64], shift: f64) -> Self {
        let t = ln_ratios.len();
        if t == 0 {
            return Self::default();
        }
        let g: Vec<f64> = ln_ratios.iter().map(|&y| g_kernel(y + shift)).collect();
        let mean = g.iter().sum::<f64>() / t as f64;
        let variance = if t > 1 { g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1) as f64 } else { 0.0 };
        let h = t.div_ceil(2);
        let half_mean = g[..h].iter().sum::<f64>() / h as f64;
        Self { mean, variance, half_mean }
    }

    pub fn relative_stderr(&self, t: usize) -> f64 {
        self.variance.sqrt() / self.mean / (t as f64).sqrt()
    }

    pub fn discrepancy(&self) -> f64 {
        (self.mean - self.half_mean).abs() / self.mean
    }
}

/// Chain-length control and resource limits.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainParams {
    pub t_init: u64,
    pub epsilon: f64,
    pub lambda: f64,
    pub cache_capacity: usize,
    /// Hard cap on `T_j`; reaching it marks the record partial.
    pub max_samples: u64,
    pub deadline: Option<Instant>,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            t_init: 10_000,
            epsilon: 0.25,
            lambda: 2.0,
            cache_capacity: 1 << 16,
            max_samples: u64::MAX,
            deadline: None,
        }
    }
}

/// A completed chain at one schedule point. Sample `α` (starting after
/// the seed) contributes `ln(π_j/π_{j-1})` and `ln(π_j/π_{j+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub rate_index: usize,
    pub p: f64,
    /// Rate at index `j - 1`, absent at the upper end.
    pub p_prev: Option<f64>,
    /// Rate at index `j + 1`, absent at the lower end.
    pub p_next: Option<f64>,
    pub seed_config: BitVec,
    pub final_config: BitVec,
    pub samples: u64,
    /// Expanded weight of each visited sample.
    pub histogram: BTreeMap<u64, u64>,
    pub transitions: u64,
    pub decoder_calls: u64,
    pub cache_hits: u64,
    #[serde(skip)]
    pub ln_ratio_prev: Vec<f64>,
    #[serde(skip)]
    pub ln_ratio_next: Vec<f64>,
    pub g_prev: Option<KernelStats>,
    pub g_next: Option<KernelStats>,
    pub sigma: f64,
    pub delta: f64,
    /// True when the budget stopped the chain before the precision target.
    pub partial: bool,
    pub wall_seconds: f64,
}

/// Runs the chain at schedule point `j` from `seed` until the relative
/// error of its kernel means satisfies `σ + Δ <= ε / √t`, growing the
/// length by `⌈λ' T_init⌉` with `λ'` multiplied by `λ` after every
/// extension. Sides without a neighbour are ignored in the test.
#[allow(clippy::too_many_arguments)]
pub fn run_chain<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    decoder: &Decoder,
    j: usize,
    seed: &BitVec,
    schedule: &RateSchedule,
    t_total: usize,
    params: &ChainParams,
    rng: &mut R,
) -> Result<ChainRecord> {
    if j >= schedule.len() {
        return Err(Error::invalid(format!("schedule has no point {j}")));
    }
    if params.t_init == 0 || !(params.epsilon > 0.0) || !(params.lambda > 0.0) || t_total == 0 {
        return Err(Error::invalid("T_init, epsilon, lambda and t must be positive"));
    }
    if seed.len() != sys.num_faults() {
        return Err(Error::dim("seed length differs from column count"));
    }
    let start = Instant::now();
    let p = schedule.p_values[j];
    let pi = PiTable::new(sys, p)?;
    let (p_prev, p_next) = schedule.neighbours(j);
    let ratio_prev = p_prev.map(|q| PiTable::new(sys, q).map(|t| pi.ratio_to(&t))).transpose()?;
    let ratio_next = p_next.map(|q| PiTable::new(sys, q).map(|t| pi.ratio_to(&t))).transpose()?;

    let mut oracle = FailureOracle::new(sys, decoder, params.cache_capacity);
    if !oracle.is_failure(seed)? {
        return Err(Error::invalid("chain seed is not a failing configuration"));
    }
    oracle.calls = 0;
    let mut state = ChainState::new(sys, seed.clone());
    let mut y_prev = ratio_prev.as_ref().map(|r| r.ln_pi(seed));
    let mut y_next = ratio_next.as_ref().map(|r| r.ln_pi(seed));
    let mut weight = sys.expanded_weight(seed);
    let mut rec = ChainRecord {
        rate_index: j,
        p,
        p_prev,
        p_next,
        seed_config: seed.clone(),
        final_config: seed.clone(),
        samples: 0,
        histogram: BTreeMap::new(),
        transitions: 0,
        decoder_calls: 0,
        cache_hits: 0,
        ln_ratio_prev: Vec::new(),
        ln_ratio_next: Vec::new(),
        g_prev: None,
        g_next: None,
        sigma: 0.0,
        delta: 0.0,
        partial: false,
        wall_seconds: 0.0,
    };
    let threshold = params.epsilon / (t_total as f64).sqrt();
    let mut target = params.t_init.min(params.max_samples);
    let mut lambda_prime = params.lambda;
    loop {
        while rec.samples < target {
            if rec.samples.is_multiple_of(1024) && params.deadline.is_some_and(|d| Instant::now() >= d) {
                rec.partial = true;
                break;
            }
            if let Step::Moved(k) = metropolis_update(sys, &pi, &mut oracle, &mut state, rng)? {
                debug_assert!(oracle.is_failure(state.config()).unwrap_or(false));
                let on = state.config().get(k);
                let sign = if on { 1.0 } else { -1.0 };
                if let (Some(y), Some(r)) = (&mut y_prev, &ratio_prev) {
                    *y += sign * r.delta_at(k);
                }
                if let (Some(y), Some(r)) = (&mut y_next, &ratio_next) {
                    *y += sign * r.delta_at(k);
                }
                let m = u64::from(sys.multiplicities()[k]);
                weight = if on { weight + m } else { weight - m };
                rec.transitions += 1;
            }
            rec.samples += 1;
            *rec.histogram.entry(weight).or_default() += 1;
            if let Some(y) = y_prev {
                rec.ln_ratio_prev.push(y);
            }
            if let Some(y) = y_next {
                rec.ln_ratio_next.push(y);
            }
        }
        let t = rec.samples as usize;
        rec.g_prev = p_prev.map(|_| KernelStats::of(&rec.ln_ratio_prev, 0.0));
        rec.g_next = p_next.map(|_| KernelStats::of(&rec.ln_ratio_next, 0.0));
        let sides = [rec.g_prev, rec.g_next];
        rec.sigma = sides.iter().flatten().map(|s| s.relative_stderr(t)).fold(0.0, f64::max);
        rec.delta = sides.iter().flatten().map(KernelStats::discrepancy).fold(0.0, f64::max);
        if rec.partial || !(rec.sigma + rec.delta > threshold) {
            break;
        }
        if target >= params.max_samples {
            rec.partial = true;
            break;
        }
        target = target.saturating_add((lambda_prime * params.t_init as f64).ceil() as u64).min(params.max_samples);
        lambda_prime *= params.lambda;
    }
    rec.decoder_calls = oracle.calls;
    rec.cache_hits = oracle.hits;
    rec.final_config = state.into_config();
    rec.wall_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}
