use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::estimates::{RateEstimate, SpectrumEstimate};
use crate::decoders::Decoder;
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::rng::{self, child_seed};
use crate::system::{CssSplit, DecodingSystem};

/// Trials per independent RNG stream.
pub const CHUNK: u64 = 2048;
/// Chunks evaluated between stopping checks in target-driven runs.
const BATCH_CHUNKS: u64 = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub trials: u64,
    pub failures: u64,
    pub weight_sum: f64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            failures: self.failures + o.failures,
            weight_sum: self.weight_sum + o.weight_sum,
        }
    }
}

/// Runs `trials` trials split into fixed-size chunks, chunk `c` using stream
/// `c` of `seed`. The result does not depend on the worker count.
pub fn run_chunks<F>(trials: u64, seed: u64, f: F) -> Result<Tally>
where
    F: Fn(&mut rng::Rng, u64) -> Result<Tally> + Sync,
{
    run_chunk_range(0, trials.div_ceil(CHUNK), trials, seed, &f)
}

fn run_chunk_range<F>(first: u64, last: u64, trials: u64, seed: u64, f: &F) -> Result<Tally>
where
    F: Fn(&mut rng::Rng, u64) -> Result<Tally> + Sync,
{
    (first..last)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(trials - c * CHUNK);
            f(&mut rng::stream(seed, c), n)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
}

/// Runs batches of chunks until `failure_target` failures or `max_trials`.
pub fn run_until<F>(failure_target: u64, max_trials: u64, seed: u64, f: F) -> Result<Tally>
where
    F: Fn(&mut rng::Rng, u64) -> Result<Tally> + Sync,
{
    let total_chunks = max_trials.div_ceil(CHUNK);
    let mut acc = Tally::default();
    let mut next = 0;
    while next < total_chunks && acc.failures < failure_target {
        let last = (next + BATCH_CHUNKS).min(total_chunks);
        acc = acc.merge(run_chunk_range(next, last, max_trials, seed, &f)?);
        next = last;
    }
    Ok(acc)
}

/// Uniform weight-`w` expanded error, folded to the compressed columns.
pub fn draw_weight<R: Rng + ?Sized>(sys: &DecodingSystem, w: u64, rng: &mut R) -> BitVec {
    let n = sys.expanded_count() as usize;
    let mut e = BitVec::zeros(sys.num_faults());
    let picks = rand::seq::index::sample(rng, n, w as usize);
    if sys.num_faults() == n {
        for i in picks.iter() {
            e.set(i, true);
        }
    } else {
        for i in picks.iter() {
            e.flip(sys.expanded_to_compressed(i as u64));
        }
    }
    e
}

/// Per-column independent flip model at per-copy rate `q`.
pub struct RateSampler {
    q: f64,
    binomials: Vec<Option<Binomial>>,
}

impl RateSampler {
    pub fn new(sys: &DecodingSystem, p: f64) -> Result<Self> {
        let q = sys.per_copy_rate(p);
        if !(0.0..0.5).contains(&q) {
            return Err(Error::invalid(format!("per-copy rate {q} outside [0, 1/2)")));
        }
        let binomials = sys
            .multiplicities()
            .iter()
            .map(|&m| {
                (m > 1)
                    .then(|| Binomial::new(u64::from(m), q).map_err(|e| Error::invalid(e.to_string())))
                    .transpose()
            })
            .collect::<Result<_>>()?;
        Ok(Self { q, binomials })
    }

    /// Draws a compressed error and its expanded weight.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (BitVec, u64) {
        let mut e = BitVec::zeros(self.binomials.len());
        let mut weight = 0;
        for (j, b) in self.binomials.iter().enumerate() {
            let k = match b {
                None => u64::from(rng.gen::<f64>() < self.q),
                Some(b) => b.sample(rng),
            };
            weight += k;
            if k % 2 == 1 {
                e.set(j, true);
            }
        }
        (e, weight)
    }
}

/// `T` trials of weight-`w` expanded noise. Returns `(failures, trials)`.
pub fn sample_weight<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    dec: &Decoder,
    w: u64,
    trials: u64,
    rng: &mut R,
) -> Result<(u64, u64)> {
    let t = run_chunks(trials, child_seed(rng), weight_trials(sys, dec, w)?)?;
    Ok((t.failures, t.trials))
}

/// Samples weight-`w` noise until `failure_target` failures or `max_trials`.
pub fn sample_weight_until<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    dec: &Decoder,
    w: u64,
    failure_target: u64,
    max_trials: u64,
    rng: &mut R,
) -> Result<(u64, u64)> {
    let t = run_until(failure_target, max_trials, child_seed(rng), weight_trials(sys, dec, w)?)?;
    Ok((t.failures, t.trials))
}

fn weight_trials<'a>(
    sys: &'a DecodingSystem,
    dec: &'a Decoder,
    w: u64,
) -> Result<impl Fn(&mut rng::Rng, u64) -> Result<Tally> + Sync + 'a> {
    if w > sys.expanded_count() {
        return Err(Error::invalid(format!("weight {w} exceeds N = {}", sys.expanded_count())));
    }
    Ok(move |r: &mut rng::Rng, n: u64| {
        let mut t = Tally { trials: n, ..Tally::default() };
        for _ in 0..n {
            let e = draw_weight(sys, w, r);
            if dec.is_failure(sys, &e)? {
                t.failures += 1;
            }
        }
        t.weight_sum = (w * n) as f64;
        Ok(t)
    })
}

/// Direct sampling at global rate `p`.
pub fn sample_rate<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    dec: &Decoder,
    p: f64,
    trials: u64,
    rng: &mut R,
) -> Result<RateEstimate> {
    let t = run_chunks(trials, child_seed(rng), rate_trials(sys, dec, p)?)?;
    Ok(rate_estimate(p, t))
}

/// Direct sampling until `failure_target` failures or `max_trials`.
pub fn sample_rate_until<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    dec: &Decoder,
    p: f64,
    failure_target: u64,
    max_trials: u64,
    rng: &mut R,
) -> Result<RateEstimate> {
    let t = run_until(failure_target, max_trials, child_seed(rng), rate_trials(sys, dec, p)?)?;
    Ok(rate_estimate(p, t))
}

fn rate_estimate(p: f64, t: Tally) -> RateEstimate {
    RateEstimate {
        p,
        trials: t.trials,
        failures: t.failures,
        mean_weight: if t.trials > 0 { t.weight_sum / t.trials as f64 } else { f64::NAN },
    }
}

fn rate_trials<'a>(
    sys: &'a DecodingSystem,
    dec: &'a Decoder,
    p: f64,
) -> Result<impl Fn(&mut rng::Rng, u64) -> Result<Tally> + Sync + 'a> {
    let sampler = RateSampler::new(sys, p)?;
    Ok(move |r: &mut rng::Rng, n: u64| {
        let mut t = Tally { trials: n, ..Tally::default() };
        for _ in 0..n {
            let (e, w) = sampler.draw(r);
            t.weight_sum += w as f64;
            if !e.is_zero() && dec.is_failure(sys, &e)? {
                t.failures += 1;
            }
        }
        Ok(t)
    })
}

/// Samples a spectrum with a fixed trial count per weight.
pub fn sample_spectrum<R: Rng + ?Sized>(
    sys: &DecodingSystem,
    dec: &Decoder,
    weights: &[u64],
    trials: u64,
    rng: &mut R,
) -> Result<SpectrumEstimate> {
    let mut spec = SpectrumEstimate::new(sys.expanded_count(), sys.num_actions());
    for &w in weights {
        let (f, t) = sample_weight(sys, dec, w, trials, rng)?;
        spec.record(w, t, f)?;
    }
    Ok(spec)
}

/// Noise model for joint sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Noise {
    Rate(f64),
    Weight(u64),
}

/// Samples parent-system noise, decodes the X and Z parts separately and
/// counts a failure when either part fails.
pub fn sample_css_correlated<R: Rng + ?Sized>(
    parent: &DecodingSystem,
    split: &CssSplit,
    dec_x: &Decoder,
    dec_z: &Decoder,
    noise: Noise,
    trials: u64,
    rng: &mut R,
) -> Result<RateEstimate> {
    let sampler = match noise {
        Noise::Rate(p) => Some(RateSampler::new(parent, p)?),
        Noise::Weight(w) if w > parent.expanded_count() => {
            return Err(Error::invalid(format!("weight {w} exceeds N")));
        }
        Noise::Weight(_) => None,
    };
    let side_fails = |sys: &DecodingSystem, origin: &[usize], dec: &Decoder, e: &BitVec| -> Result<bool> {
        let b = e.select(origin);
        if b.is_zero() {
            return Ok(false);
        }
        dec.is_failure(sys, &b)
    };
    let t = run_chunks(trials, child_seed(rng), |r, n| {
        let mut t = Tally { trials: n, ..Tally::default() };
        for _ in 0..n {
            let (e, w) = match (&sampler, noise) {
                (Some(s), _) => s.draw(r),
                (None, Noise::Weight(w)) => (draw_weight(parent, w, r), w),
                (None, Noise::Rate(_)) => unreachable!(),
            };
            t.weight_sum += w as f64;
            let fail = side_fails(&split.x, &split.x_origin, dec_x, &e)? || side_fails(&split.z, &split.z_origin, dec_z, &e)?;
            t.failures += u64::from(fail);
        }
        Ok(t)
    })?;
    let p = match noise {
        Noise::Rate(p) => p,
        Noise::Weight(_) => f64::NAN,
    };
    Ok(rate_estimate(p, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::DecoderConfig;
    use crate::f2linalg::BitMatrix;
    use crate::rng::stream;
    use crate::sampling::transform;
    use crate::system::{css_split, gen_repetition};

    #[test]
    fn weight_zero_never_fails() {
        let sys = gen_repetition(5).unwrap();
        let dec = Decoder::new(&sys, &DecoderConfig::default()).unwrap();
        let (f, t) = sample_weight(&sys, &dec, 0, 5000, &mut stream(1, 0)).unwrap();
        assert_eq!((f, t), (0, 5000));
        assert!(sample_weight(&sys, &dec, 6, 10, &mut stream(1, 0)).is_err());
    }

    #[test]
    fn repetition_weights_are_deterministic_outcomes() {
        let sys = gen_repetition(5).unwrap();
        let dec = Decoder::new(&sys, &DecoderConfig::default()).unwrap();
        let (f3, t3) = sample_weight(&sys, &dec, 3, 3000, &mut stream(2, 0)).unwrap();
        assert_eq!(f3, t3);
        let (f2, _) = sample_weight(&sys, &dec, 2, 3000, &mut stream(2, 1)).unwrap();
        assert_eq!(f2, 0);
    }

    #[test]
    fn repetition_rate_matches_closed_form() {
        let sys = gen_repetition(5).unwrap();
        let dec = Decoder::new(&sys, &DecoderConfig::default()).unwrap();
        let r = sample_rate(&sys, &dec, 0.1, 100_000, &mut stream(3, 0)).unwrap();
        let exact = transform(|w| if w >= 3 { 1.0 } else { 0.0 }, 5, 0.1);
        assert!((r.phat() - exact).abs() < 3.0 * r.stderr(), "{} vs {exact}", r.phat());
        assert!((r.mean_weight - 0.5).abs() < 0.01);
        let z = sample_rate(&sys, &dec, 0.0, 1000, &mut stream(3, 1)).unwrap();
        assert_eq!(z.failures, 0);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let sys = gen_repetition(7).unwrap();
        let dec = Decoder::new(&sys, &DecoderConfig::default()).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_rate(&sys, &dec, 0.2, 20_000, &mut stream(4, 0)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn until_mode_stops_near_target() {
        let sys = gen_repetition(5).unwrap();
        let dec = Decoder::new(&sys, &DecoderConfig::default()).unwrap();
        let (f, t) = sample_weight_until(&sys, &dec, 3, 100, 1_000_000, &mut stream(5, 0)).unwrap();
        assert!(f >= 100 && t <= BATCH_CHUNKS * CHUNK);
    }

    #[test]
    fn expanded_weight_draws_cancel_pairs() {
        let h = BitMatrix::from_bitstrs(&["11"]).unwrap();
        let a = BitMatrix::from_bitstrs(&["10"]).unwrap();
        let sys = DecodingSystem::new("m", h, a, vec![1, 3], 3.0).unwrap();
        let mut rng = stream(6, 0);
        let mut col1_odd = 0;
        let n = 20_000;
        for _ in 0..n {
            let e = draw_weight(&sys, 2, &mut rng);
            col1_odd += usize::from(e.get(1));
        }
        // Of C(4,2)=6 pairs, 3 contain copy 0 (column 1 flipped once), 3 are
        // two copies of column 1 (cancelled).
        assert!((col1_odd as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn css_disjoint_sides_are_independent() {
        // Two repetition-3 blocks: X side on columns 0..3, Z side on 3..6.
        let h = BitMatrix::from_bitstrs(&["110000", "011000", "000110", "000011"]).unwrap();
        let a = BitMatrix::from_bitstrs(&["000111", "111000"]).unwrap();
        let parent = DecodingSystem::new("pair", h, a, vec![1; 6], 1.0).unwrap();
        let split = css_split(&parent, &[2, 3], &[0, 1], &[0], &[1]).unwrap();
        let cfg = DecoderConfig::default();
        let dx = Decoder::new(&split.x, &cfg).unwrap();
        let dz = Decoder::new(&split.z, &cfg).unwrap();
        let joint = sample_css_correlated(&parent, &split, &dx, &dz, Noise::Rate(0.2), 100_000, &mut stream(7, 0)).unwrap();
        let px = 3.0 * 0.04 * 0.8 + 0.008;
        let expected = 2.0 * px - px * px;
        assert!((joint.phat() - expected).abs() < 3.0 * joint.stderr());
        let zero = sample_css_correlated(&parent, &split, &dx, &dz, Noise::Weight(0), 100, &mut stream(7, 1)).unwrap();
        assert_eq!(zero.failures, 0);
    }

    #[test]
    fn shared_column_reaches_both_decoders() {
        let h = BitMatrix::from_bitstrs(&["11000", "01100", "00110", "00011"]).unwrap();
        let a = BitMatrix::from_bitstrs(&["11100", "00111"]).unwrap();
        let parent = DecodingSystem::new("mixed", h, a, vec![1; 5], 1.0).unwrap();
        let split = css_split(&parent, &[0, 1], &[2, 3], &[0], &[1]).unwrap();
        let e = BitVec::from_indices(5, &[2]);
        let bx = e.select(&split.x_origin);
        let bz = e.select(&split.z_origin);
        assert!(!split.x.syndrome(&bx).is_zero());
        assert!(!split.z.syndrome(&bz).is_zero());
    }
}
