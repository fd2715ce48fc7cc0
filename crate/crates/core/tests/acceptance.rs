//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use failspec::ansatz::{allocate_trials, fit, log_grid, max_deviation, parse_fixed, plan_spectrum, predict_curve, AnsatzParams, FitOptions, Variant};
use failspec::decoders::{Decoder, DecoderConfig};
use failspec::f2linalg::BitVec;
use failspec::minweight::{enumerate_logicals_exact, min_weight_class, onset_exact, onset_sampled, restrictions};
use failspec::sampling::{sample_rate, sample_rate_until, sample_weight, transform, SpectrumEstimate};
use failspec::splitting::{multi_seeded_split, pi_weight, transition_probability, FailureOracle, PiTable, Seeding, SplitOptions, SplitRun};
use failspec::system::{gen_repetition, gen_unrotated_toric, read_system, ut_edge, DecodingSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{Binomial, Discrete};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn lookup(sys: &DecodingSystem) -> Decoder {
    Decoder::new(sys, &DecoderConfig::default()).unwrap()
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    check(t <= limit, format!("took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
}

/// Toric onset counts in closed form.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for d in [4usize, 6] {
        let sys = gen_unrotated_toric(d, d).unwrap();
        let found = &enumerate_logicals_exact(&sys, d).unwrap()[0];
        let res = onset_exact(&sys, found).unwrap();
        let c = choose(d as u64, d as u64 / 2) as f64;
        check(found.weight() == d && found.len() == 2 * d, format!("d={d}: |L| = {}", found.len()))?;
        check(res.restrictions_count == 2.0 * d as f64 * c, format!("d={d}: restrictions {}", res.restrictions_count))?;
        check(res.fails_count == d as f64 * c, format!("d={d}: fails {}", res.fails_count))?;
        notes.push(format!("d={d}: |L|={} restrictions={} fails={}", found.len(), res.restrictions_count, res.fails_count));
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(notes.join("; "))
}

/// Exhaustive spectrum oracle against the samplers and the transform.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let systems = [
        gen_repetition(5).unwrap(),
        gen_repetition(7).unwrap(),
        gen_unrotated_toric(2, 2).unwrap(),
        gen_unrotated_toric(2, 3).unwrap(),
        gen_unrotated_toric(2, 4).unwrap(),
    ];
    let trials = 100_000u64;
    let mut r = rng(2);
    let (mut worst_z, mut worst_rel) = (0.0f64, 0.0f64);
    for sys in &systems {
        let dec = lookup(sys);
        let n = sys.num_faults() as u64;
        let counts = exhaustive_fail_counts(sys, &dec);
        let f = |w: u64| counts[w as usize] as f64 / choose(n, w) as f64;
        for w in 1..=n {
            let (fails, t) = sample_weight(sys, &dec, w, trials, &mut r).unwrap();
            let fw = f(w);
            let sigma = (fw * (1.0 - fw) / t as f64).sqrt();
            let dev = (fails as f64 / t as f64 - fw).abs();
            check(dev <= 3.0 * sigma, format!("{} w={w}: deviation {dev} > 3 sigma {sigma}", sys.label()))?;
            if sigma > 0.0 {
                worst_z = worst_z.max(dev / sigma);
            }
        }
        for q in [0.01, 0.05, 0.1, 0.2, 0.4] {
            let exact = exhaustive_rate(sys, &dec, q);
            let via = transform(f, n, q);
            let rel = (via - exact).abs() / exact;
            check(rel <= 1e-12, format!("{} q={q}: transform relative error {rel}", sys.label()))?;
            worst_rel = worst_rel.max(rel);
            let est = sample_rate(sys, &dec, q, trials, &mut r).unwrap();
            let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
            let dev = (est.phat() - exact).abs();
            check(dev <= 3.0 * sigma, format!("{} q={q}: rate deviation {dev} > 3 sigma {sigma}", sys.label()))?;
            worst_z = worst_z.max(dev / sigma);
        }
    }
    within_time(start, Duration::from_secs(300))?;
    Ok(format!("5 systems; worst |z| = {worst_z:.2}; worst transform error {worst_rel:.1e}"))
}

/// Restriction set and complement construction against brute force.
fn criterion_3() -> Outcome {
    let sys = gen_unrotated_toric(4, 4).unwrap();
    let logicals = enumerate_logicals_exact(&sys, 4).unwrap()[0].members();
    let half = errors_of_weight(sys.num_faults(), 2);
    let from_set: HashSet<BitVec> = logicals.iter().flat_map(|l| restrictions(l, 2).collect::<Vec<_>>()).collect();

    let dec = lookup(&sys);
    let failing: HashSet<BitVec> = half.iter().filter(|e| dec.is_failure(&sys, e).unwrap()).cloned().collect();
    // Each failure shares its syndrome with the decoder's correction, of
    // another action; both halves of that logical belong to the set.
    let built: HashSet<BitVec> = failing
        .iter()
        .flat_map(|e| {
            let c = dec.decode(&sys.syndrome(e)).unwrap().correction;
            [e.clone(), c]
        })
        .collect();
    check(built == from_set, format!("brute-force set has {} members, restrictions {}", built.len(), from_set.len()))?;

    let mut r = rng(3);
    for i in 0..200 {
        let l0 = &logicals[r.gen_range(0..logicals.len())];
        let supp = l0.support();
        let pick: Vec<usize> = rand::seq::index::sample(&mut r, 4, 2).into_iter().map(|k| supp[k]).collect();
        let rr = BitVec::from_indices(sys.num_faults(), &pick);
        let (emin, _) = min_weight_class(&logicals, l0, &rr);
        let brute: HashSet<BitVec> = half.iter().filter(|e| sys.syndrome(e) == sys.syndrome(&rr)).cloned().collect();
        check(emin == brute, format!("pair {i}: class sizes {} vs {}", emin.len(), brute.len()))?;
    }
    Ok(format!("|X| = {} from {} failures; 200/200 classes equal", built.len(), failing.len()))
}

/// Sampled onset is unbiased.
fn criterion_4() -> Outcome {
    let sys = gen_unrotated_toric(4, 4).unwrap();
    let found = &enumerate_logicals_exact(&sys, 4).unwrap()[0];
    let one = onset_sampled(&sys, found, 100_000, &mut rng(4)).unwrap();
    let dev1 = (one.fails_estimate - 24.0).abs();
    check(dev1 <= 3.0 * one.stderr, format!("single run {} +- {}", one.fails_estimate, one.stderr))?;
    let runs: Vec<_> = (0..20).map(|s| onset_sampled(&sys, found, 100_000, &mut rng(400 + s)).unwrap()).collect();
    let mean = runs.iter().map(|x| x.fails_estimate).sum::<f64>() / 20.0;
    let se = runs.iter().map(|x| x.stderr.powi(2)).sum::<f64>().sqrt() / 20.0;
    check((mean - 24.0).abs() <= 2.0 * se, format!("mean over 20 seeds {mean} +- {se}"))?;
    Ok(format!("single {} +- {:.2e}; 20-seed mean {mean} +- {se:.2e}", one.fails_estimate, one.stderr))
}

fn ut35() -> DecodingSystem {
    gen_unrotated_toric(3, 5).unwrap()
}

fn split_ut35(seeding: Seeding, t_init: u64, seed: u64) -> SplitRun {
    let sys = ut35();
    let dec = lookup(&sys);
    let mut opts = SplitOptions::new(0.03, vec![0.005], 3);
    opts.l = 26;
    opts.m = 3;
    opts.chain.t_init = t_init;
    opts.seeding = seeding;
    multi_seeded_split(&sys, &dec, &opts, &mut rng(seed)).unwrap()
}

/// Standard error of the instance mean, including the shared `P(p0)` error.
fn split_sigma(run: &SplitRun, i: usize) -> f64 {
    let s = &run.rates[i];
    let n = run.instances.len() as f64;
    ((s.p_std / n.sqrt()).powi(2) + (s.p_hat * run.p0_stderr / run.p0_hat).powi(2)).sqrt()
}

/// Splitting against direct Monte Carlo.
fn criterion_5() -> Outcome {
    let start = Instant::now();
    let sys = ut35();
    let dec = lookup(&sys);
    let run = split_ut35(Seeding::MonteCarlo, 10_000, 5);
    check(run.instances.len() == 78, format!("{} instances", run.instances.len()))?;
    let mut worst = 0.0f64;
    let mut r = rng(50);
    for (i, s) in run.rates.iter().enumerate() {
        let mc = sample_rate_until(&sys, &dec, s.p, 400, 1 << 34, &mut r).unwrap();
        if mc.failures < 100 {
            continue;
        }
        let sigma = (split_sigma(&run, i).powi(2) + mc.stderr().powi(2)).sqrt();
        let tol = (0.25 * mc.phat()).max(3.0 * sigma);
        let dev = (s.p_hat - mc.phat()).abs();
        check(dev <= tol, format!("p={:.4e}: split {:.4e} vs MC {:.4e}, tolerance {:.2e}", s.p, s.p_hat, mc.phat(), tol))?;
        worst = worst.max(dev / mc.phat());
    }
    within_time(start, Duration::from_secs(1800))?;
    let last = run.rates.last().unwrap();
    Ok(format!("{} rates, worst relative deviation {:.1}%; P(0.005) = {:.3e}", run.rates.len(), 100.0 * worst, last.p_hat))
}

/// Long-logical seeding underestimates and recovers with longer chains.
fn criterion_6() -> Outcome {
    let sys = ut35();
    let dec = lookup(&sys);
    let long: Vec<usize> = (0..5).map(|y| ut_edge(3, 5, true, 0, y)).collect();
    let seed = BitVec::from_indices(sys.num_faults(), &long);
    check(sys.is_logical(&seed), "seed is not a logical".into())?;
    let mc = sample_rate_until(&sys, &dec, 0.005, 1000, 1 << 34, &mut rng(60)).unwrap();
    let short = split_ut35(Seeding::Fixed(seed.clone()), 200, 6);
    let longer = split_ut35(Seeding::Fixed(seed), 2000, 6);
    let i = short.rates.len() - 1;
    let (ps, pl) = (short.rates[i].p_hat, longer.rates[i].p_hat);
    let sigma = (split_sigma(&short, i).powi(2) + mc.stderr().powi(2)).sqrt();
    let gap = mc.phat() - ps;
    check(gap > 3.0 * sigma, format!("T_init=200: {ps:.3e} vs MC {:.3e}, gap {gap:.2e} <= 3 sigma {sigma:.2e}", mc.phat()))?;
    check((mc.phat() - pl).abs() < gap, format!("bias did not shrink: T_init=2000 gives {pl:.3e}"))?;
    Ok(format!("MC {:.3e}; T_init=200 {ps:.3e} ({:.0} sigma low); T_init=2000 {pl:.3e}", mc.phat(), gap / sigma))
}

/// Ansatz round trip with Poisson noise.
fn criterion_7() -> Outcome {
    let start = Instant::now();
    let n = 10_000u64;
    let truth = AnsatzParams { gamma1: 7.0, gamma2: 10.0, wc: 20.0, ..AnsatzParams::new(Variant::A5, 6, 1e-4, 0.75) };
    let mut spec = SpectrumEstimate::new(n, 2);
    let mut r = rng(7);
    for (w, t) in plan_spectrum(&truth, n, 16, 1000.0, 1 << 40).unwrap() {
        let lambda = truth.eval(w as f64) * t as f64;
        let k = (Poisson::new(lambda).unwrap().sample(&mut r) as u64).min(t);
        spec.record(w, t, k).unwrap();
    }
    let fixed = parse_fixed(&["w0=6"]).unwrap();
    let res = fit(&spec, &[], Variant::A5, &fixed, None, &FitOptions::default()).unwrap();
    let grid = log_grid(1e-5, 0.5, 300);
    let dev = max_deviation(&predict_curve(&res.params, n, 1.0, &grid), &predict_curve(&truth, n, 1.0, &grid), None).unwrap();
    check(res.free_parameters.len() == 4, format!("free parameters {:?}", res.free_parameters))?;
    check(dev < 1.1, format!("max deviation {dev}"))?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("{} points, chi2/dof = {:.2}, max deviation {dev:.4}", spec.len(), res.chi2 / res.dof as f64))
}

/// Detailed balance on repetition-5 at q = 1/5, in exact rationals.
fn criterion_8() -> Outcome {
    let sys = gen_repetition(5).unwrap();
    let dec = lookup(&sys);
    let pi = PiTable::new(&sys, 0.2).unwrap();
    let mut oracle = FailureOracle::new(&sys, &dec, 0);
    let failing: Vec<BitVec> =
        (0..32u64).map(|m| error_of(5, m)).filter(|e| dec.is_failure(&sys, e).unwrap()).collect();
    // 5^5 π(E) = 4^(5-|E|); a single-bit proposal has probability 1/5 and
    // acceptance min(1, π(E')/π(E)).
    let num = |e: &BitVec| 4u128.pow(5 - e.weight() as u32);
    let exact_t = |a: &BitVec, b: &BitVec| -> (u128, u128) {
        if a.xor(b).weight() != 1 {
            return (0, 1);
        }
        let (pa, pb) = (num(a), num(b));
        if pb >= pa { (1, 5) } else { (pb, 5 * pa) }
    };
    let mut pairs = 0;
    let mut worst = 0.0f64;
    for e in &failing {
        for e2 in &failing {
            if e == e2 {
                continue;
            }
            let (a12, b12) = exact_t(e, e2);
            let (a21, b21) = exact_t(e2, e);
            check(num(e) * a12 * b21 == num(e2) * a21 * b12, format!("rational balance fails for {e:?} -> {e2:?}"))?;
            for (x, y, a, b) in [(e, e2, a12, b12), (e2, e, a21, b21)] {
                let t = transition_probability(&sys, &pi, &mut oracle, x, y).unwrap();
                let want = a as f64 / b as f64;
                let err = (t - want).abs();
                check(err <= 1e-15 * want.max(1e-300) || (want == 0.0 && t == 0.0), format!("T = {t}, exact {want}"))?;
                worst = worst.max(err);
            }
            pairs += 1;
        }
    }
    Ok(format!("{} failing configurations, {pairs} ordered pairs balanced exactly; kernel error <= {worst:.1e}", failing.len()))
}

/// Allocation meets its variance target.
fn criterion_9() -> Outcome {
    let n = 2000u64;
    let spectrum = AnsatzParams { gamma: 4.5, ..AnsatzParams::new(Variant::A3, 5, 3e-4, 0.75) };
    let mut worst = 0.0f64;
    for q in [1e-3, 5e-3, 2e-2] {
        let p = spectrum.predict_rate(n, q);
        let sigma = 0.01 * p;
        let alloc = allocate_trials(&spectrum, n, q, sigma).unwrap();
        let binom = Binomial::new(q, n).unwrap();
        let achieved: f64 = alloc
            .trials
            .iter()
            .filter(|(_, &t)| t > 0.0)
            .map(|(&w, &t)| {
                let f = spectrum.eval(w as f64);
                binom.pmf(w).powi(2) * f * (1.0 - f) / t
            })
            .sum();
        let rel = (achieved - sigma * sigma).abs() / (sigma * sigma);
        check(rel <= 1e-9, format!("q={q}: achieved {achieved:e} vs target {:e}", sigma * sigma))?;
        worst = worst.max(rel);
    }
    Ok(format!("3 rates, worst relative error {worst:.1e}"))
}

fn odd_parity(q: f64, m: u64) -> f64 {
    let b = Binomial::new(q, m).unwrap();
    (1..=m).step_by(2).map(|k| b.pmf(k)).sum()
}

/// Bundled file with non-unit multiplicities.
fn criterion_10() -> Outcome {
    let sys = read_system(concat!(env!("CARGO_MANIFEST_DIR"), "/data/weighted_rep5.txt")).unwrap();
    check(sys.multiplicities() == [1, 15, 1, 15, 1], format!("multiplicities {:?}", sys.multiplicities()))?;
    check(sys.expanded_count() == 33, format!("expanded count {}", sys.expanded_count()))?;
    let e = BitVec::from_indices(5, &[0, 1, 3]);
    check(sys.rho(&e) == 225.0, format!("rho {}", sys.rho(&e)))?;
    check(sys.expanded_weight(&e) == 31, format!("expanded weight {}", sys.expanded_weight(&e)))?;
    let p = 0.045;
    let q = p / sys.rate_divisor();
    let mut total = 0.0;
    let mut worst = 0.0f64;
    for mask in 0..32u64 {
        let e = error_of(5, mask);
        let want: f64 = (0..5)
            .map(|j| {
                let pj = odd_parity(q, u64::from(sys.multiplicities()[j]));
                if e.get(j) { pj } else { 1.0 - pj }
            })
            .product();
        let got = pi_weight(&sys, &e, p).unwrap().exp();
        let rel = (got - want).abs() / want;
        check(rel <= 1e-12, format!("mask {mask}: {got} vs {want}"))?;
        worst = worst.max(rel);
        total += got;
    }
    check((total - 1.0).abs() <= 1e-12, format!("weights sum to {total}"))?;
    Ok(format!("N = 33, rho = 225, parity weights within {worst:.1e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("toric onset closed form", criterion_1),
        ("exhaustive spectrum oracle", criterion_2),
        ("restriction set and complement classes", criterion_3),
        ("sampled onset unbiased", criterion_4),
        ("splitting vs Monte Carlo on UT(3,5)", criterion_5),
        ("long-logical seeding bias", criterion_6),
        ("a5 round trip", criterion_7),
        ("detailed balance on rep-5", criterion_8),
        ("allocation identity", criterion_9),
        ("weighted interchange file", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|s| id.ends_with(&format!(" {s}")) || name.contains(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {id:>12} [{name}] ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {id:>12} [{name}] ({secs:.1}s): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
