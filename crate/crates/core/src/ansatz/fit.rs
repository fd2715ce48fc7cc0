use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dense::invert;
use super::params::{AnsatzParams, Variant};
use super::simplex::nelder_mead;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::sampling::{RateEstimate, SpectrumEstimate};

/// Parameters held at given values during a fit, keyed by name
/// (`w0`, `f0`, `gamma`, `gamma1`, `gamma2`, `wc`, `c`, `a`).
pub type FixedParams = BTreeMap<String, f64>;

/// Parses `name=value` items.
pub fn parse_fixed<S: AsRef<str>>(items: &[S]) -> Result<FixedParams> {
    let mut out = FixedParams::new();
    for item in items {
        for part in item.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected name=value, found {part:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad value in {part:?}")))?;
            out.insert(k.trim().to_owned(), v);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: AnsatzParams,
    pub chi2: f64,
    pub dof: usize,
    /// Names of the fitted parameters, in covariance order (`w0` first when
    /// it was chosen by grid search; it has no covariance entry).
    pub free_parameters: Vec<String>,
    /// Covariance of the continuous free parameters from the Gauss–Newton
    /// approximation at the optimum.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Divisor `b` mapping a global rate `p` to the per-copy rate `p/b`.
    pub rate_divisor: f64,
    pub starts: usize,
    pub seed: u64,
    pub max_evaluations: usize,
    /// Candidate onsets when `w0` is free. Defaults to the 32 integers
    /// ending at the smallest weight with observed failures.
    pub w0_candidates: Option<Vec<u64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { rate_divisor: 1.0, starts: 8, seed: 0, max_evaluations: 20_000, w0_candidates: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointKind {
    Weight(u64),
    /// Per-copy rate `q`.
    Rate(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    pub kind: PointKind,
    pub value: f64,
    pub sigma: f64,
}

/// Binomial standard error with a half-count floor so that points with no
/// (or only) failures keep a finite weight.
pub fn pseudo_stderr(failures: u64, trials: u64) -> f64 {
    let t = trials as f64;
    let f = (failures as f64).clamp(0.5, (t - 0.5).max(0.5)) / t;
    (f * (1.0 - f) / t).sqrt()
}

/// Converts estimates into weighted data points, skipping empty entries.
pub fn data_points(spec: &SpectrumEstimate, rates: &[RateEstimate], rate_divisor: f64) -> Vec<DataPoint> {
    let mut pts: Vec<DataPoint> = (0..spec.len())
        .filter(|&i| spec.trials[i] > 0)
        .map(|i| DataPoint {
            kind: PointKind::Weight(spec.weights[i]),
            value: spec.fhat(i),
            sigma: pseudo_stderr(spec.failures[i], spec.trials[i]),
        })
        .collect();
    pts.extend(rates.iter().filter(|r| r.trials > 0).map(|r| DataPoint {
        kind: PointKind::Rate(r.p / rate_divisor),
        value: r.phat(),
        sigma: pseudo_stderr(r.failures, r.trials),
    }));
    pts
}

fn residuals<'a>(params: &AnsatzParams, points: &'a [DataPoint], n_expanded: u64) -> impl Iterator<Item = f64> + 'a {
    let p = *params;
    points.iter().map(move |pt| {
        let model = match pt.kind {
            PointKind::Weight(w) => p.eval(w as f64),
            PointKind::Rate(q) => p.predict_rate(n_expanded, q),
        };
        (pt.value - model) / pt.sigma
    })
}

/// Weighted sum of squared residuals over spectrum and rate points.
pub fn chi_squared(params: &AnsatzParams, points: &[DataPoint], n_expanded: u64) -> f64 {
    residuals(params, points, n_expanded).map(|r| r * r).sum()
}

struct Layout {
    base: AnsatzParams,
    free: Vec<&'static str>,
}

impl Layout {
    fn params(&self, theta: &[f64]) -> AnsatzParams {
        let mut p = self.base;
        for (name, t) in self.free.iter().zip(theta) {
            p.set(name, t.clamp(-700.0, 700.0).exp()).expect("known parameter name");
        }
        p
    }

    fn theta(&self) -> Vec<f64> {
        self.free.iter().map(|n| self.base.get(n).expect("known parameter name").ln()).collect()
    }
}

struct Candidate {
    params: AnsatzParams,
    chi2: f64,
    converged: bool,
}

fn run_start(layout: &Layout, points: &[DataPoint], n: u64, start: usize, opts: &FitOptions) -> Candidate {
    let mut theta0 = layout.theta();
    if start > 0 {
        let mut rng = stream(opts.seed, start as u64);
        for t in theta0.iter_mut() {
            *t += rng.gen_range(-0.5..0.5);
        }
    }
    let objective = |theta: &[f64]| chi_squared(&layout.params(theta), points, n);
    let budget = opts.max_evaluations / 2;
    let first = nelder_mead(objective, &theta0, 0.5, budget, 1e-12, 1e-9);
    let second = nelder_mead(objective, &first.x, 0.1, budget, 1e-12, 1e-9);
    let best = if second.value <= first.value { second } else { first };
    Candidate { params: layout.params(&best.x), chi2: best.value, converged: best.converged }
}

fn covariance(params: &AnsatzParams, free: &[&'static str], points: &[DataPoint], n: u64) -> Option<Vec<Vec<f64>>> {
    if free.is_empty() {
        return None;
    }
    // Jacobian in log parameters keeps the normal matrix well scaled.
    let values: Vec<f64> = free.iter().map(|name| params.get(name)).collect::<Result<_>>().ok()?;
    let mut jac: Vec<Vec<f64>> = Vec::with_capacity(free.len());
    for (name, &v) in free.iter().zip(&values) {
        let h = 1e-5f64;
        let (mut lo, mut hi) = (*params, *params);
        lo.set(name, v * (-h).exp()).ok()?;
        hi.set(name, v * h.exp()).ok()?;
        let col: Vec<f64> = residuals(&hi, points, n)
            .zip(residuals(&lo, points, n))
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        jac.push(col);
    }
    let k = free.len();
    let jtj: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let inv = invert(&jtj)?;
    Some((0..k).map(|i| (0..k).map(|j| inv[i][j] * values[i] * values[j]).collect()).collect())
}

/// Minimizes the weighted least-squares objective over the free parameters
/// of `variant`. Continuous parameters are optimized in log space with a
/// multi-start simplex search; `w0`, when free, is chosen from an integer
/// grid.
pub fn fit(
    spec: &SpectrumEstimate,
    rates: &[RateEstimate],
    variant: Variant,
    fixed: &FixedParams,
    init: Option<&AnsatzParams>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if !(opts.rate_divisor > 0.0) {
        return Err(Error::invalid("rate divisor must be positive"));
    }
    let names = variant.continuous_names();
    for k in fixed.keys() {
        if k != "w0" && k != "a" && !names.contains(&k.as_str()) {
            return Err(Error::invalid(format!("parameter {k:?} is not part of variant {variant:?}")));
        }
    }
    let free: Vec<&'static str> = names.iter().copied().filter(|n| !fixed.contains_key(*n)).collect();
    let w0_free = !fixed.contains_key("w0");
    let points = data_points(spec, rates, opts.rate_divisor);
    let free_count = free.len() + usize::from(w0_free);
    if points.len() < free_count || points.is_empty() {
        return Err(Error::Underdetermined { points: points.len(), free: free_count });
    }
    let n = spec.n_expanded;

    let first_fail = (0..spec.len()).find(|&i| spec.failures[i] > 0).map(|i| spec.weights[i]);
    let w0_grid: Vec<u64> = if let Some(&w0) = fixed.get("w0").as_ref() {
        if *w0 < 1.0 || w0.fract() != 0.0 {
            return Err(Error::invalid(format!("fixed w0 must be a positive integer, got {w0}")));
        }
        vec![*w0 as u64]
    } else if let Some(c) = &opts.w0_candidates {
        c.clone()
    } else {
        let hi = first_fail.or(init.map(|p| p.w0)).unwrap_or(1).max(1);
        (hi.saturating_sub(31).max(1)..=hi).collect()
    };
    if w0_grid.is_empty() {
        return Err(Error::invalid("no onset candidates"));
    }

    let a = init.map_or(spec.asymptote, |p| p.a);
    let layouts: Vec<Layout> = w0_grid
        .iter()
        .map(|&w0| {
            let mut base = match init {
                Some(p) => AnsatzParams { variant, w0, ..*p },
                None => {
                    let f0 = first_fail
                        .and_then(|wf| spec.index_of(wf).map(|i| (wf, spec.fhat(i))))
                        .map_or(1e-3, |(wf, f)| f / (wf as f64 / w0 as f64).powf(w0 as f64));
                    AnsatzParams::new(variant, w0, f0.clamp(1e-200, 1.0), a)
                }
            };
            base.variant = variant;
            for (k, v) in fixed {
                base.set(k, *v)?;
            }
            base.validate()?;
            Ok(Layout { base, free: free.clone() })
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..layouts.len()).flat_map(|l| (0..opts.starts.max(1)).map(move |s| (l, s))).collect();
    let candidates: Vec<Candidate> = jobs
        .par_iter()
        .map(|&(l, s)| run_start(&layouts[l], &points, n, s, opts))
        .collect();
    let best = candidates
        .into_iter()
        .reduce(|x, y| if y.chi2 < x.chi2 { y } else { x })
        .expect("at least one start");

    let mut free_parameters: Vec<String> = Vec::new();
    if w0_free {
        free_parameters.push("w0".into());
    }
    free_parameters.extend(free.iter().map(|s| s.to_string()));
    Ok(FitResult {
        covariance: covariance(&best.params, &free, &points, n),
        params: best.params,
        chi2: best.chi2,
        dof: points.len() - free_count,
        free_parameters,
        converged: best.converged && best.chi2.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repetition_five_a3_fit() {
        let mut spec = SpectrumEstimate::new(5, 1);
        for w in 0..=5u64 {
            spec.record(w, 1000, if w >= 3 { 1000 } else { 0 }).unwrap();
        }
        // Failures saturate at 1 here, above the K = 1 asymptote, so the
        // asymptote is taken as 1.
        let init = AnsatzParams::new(Variant::A3, 3, 0.5, 1.0);
        let fixed = parse_fixed(&["w0=3"]).unwrap();
        let r = fit(&spec, &[], Variant::A3, &fixed, Some(&init), &FitOptions::default()).unwrap();
        assert_eq!(r.free_parameters, vec!["f0", "gamma"]);
        assert_eq!(r.dof, 4);
        for w in 3..=5u64 {
            let i = spec.index_of(w).unwrap();
            let sigma = pseudo_stderr(spec.failures[i], spec.trials[i]);
            assert!((r.params.eval(w as f64) - 1.0).abs() <= sigma, "w={w} f={}", r.params.eval(w as f64));
        }
        assert!(r.chi2 >= 0.0);
    }

    #[test]
    fn underdetermined() {
        let mut spec = SpectrumEstimate::new(100, 2);
        spec.record(10, 100, 5).unwrap();
        let fixed = parse_fixed(&["w0=6"]).unwrap();
        let err = fit(&spec, &[], Variant::A3, &fixed, None, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Underdetermined { points: 1, free: 2 }));
    }

    #[test]
    fn a5_with_fixed_onset_has_four_free() {
        let truth = AnsatzParams { gamma1: 7.0, gamma2: 10.0, wc: 20.0, ..AnsatzParams::new(Variant::A5, 6, 1e-4, 0.75) };
        let mut spec = SpectrumEstimate::new(2000, 2);
        for w in [6u64, 8, 10, 13, 16, 20, 25, 32, 40, 50, 64, 80, 100] {
            let t = 1_000_000_000_000u64;
            spec.record(w, t, (truth.eval(w as f64) * t as f64).round() as u64).unwrap();
        }
        let fixed = parse_fixed(&["w0=6"]).unwrap();
        let r = fit(&spec, &[], Variant::A5, &fixed, None, &FitOptions::default()).unwrap();
        assert_eq!(r.free_parameters.len(), 4);
        for w in [6.0, 12.0, 30.0, 90.0] {
            let ratio = r.params.eval(w) / truth.eval(w);
            assert!((ratio - 1.0).abs() < 0.02, "w={w} ratio={ratio}");
        }
        assert!(r.covariance.is_some());
    }

    #[test]
    fn free_onset_is_found_by_grid() {
        let truth = AnsatzParams { gamma: 5.5, ..AnsatzParams::new(Variant::A3, 4, 2e-3, 0.75) };
        let mut spec = SpectrumEstimate::new(500, 2);
        for w in 2..40u64 {
            let t = 10_000_000u64;
            spec.record(w, t, (truth.eval(w as f64) * t as f64).round() as u64).unwrap();
        }
        let r = fit(&spec, &[], Variant::A3, &FixedParams::new(), None, &FitOptions::default()).unwrap();
        assert_eq!(r.params.w0, 4);
        assert_eq!(r.free_parameters[0], "w0");
        assert!((r.params.gamma - 5.5).abs() < 0.05);
    }

    #[test]
    fn rate_points_enter_objective() {
        let truth = AnsatzParams { gamma: 4.0, ..AnsatzParams::new(Variant::A3, 3, 1e-2, 0.75) };
        let spec = SpectrumEstimate::new(200, 2);
        let rates: Vec<RateEstimate> = [0.005, 0.01, 0.02, 0.04, 0.08]
            .iter()
            .map(|&p| {
                let t = 100_000_000u64;
                RateEstimate { p, trials: t, failures: (truth.predict_rate(200, p) * t as f64).round() as u64, mean_weight: 0.0 }
            })
            .collect();
        let fixed = parse_fixed(&["w0=3"]).unwrap();
        let r = fit(&spec, &rates, Variant::A3, &fixed, Some(&truth), &FitOptions::default()).unwrap();
        for p in [0.001, 0.03] {
            let ratio = r.params.predict_rate(200, p) / truth.predict_rate(200, p);
            assert!((ratio - 1.0).abs() < 0.05, "p={p} ratio={ratio}");
        }
    }

    #[test]
    fn rejects_foreign_fixed_parameter() {
        let mut spec = SpectrumEstimate::new(100, 2);
        spec.record(10, 100, 5).unwrap();
        let fixed = parse_fixed(&["wc=3"]).unwrap();
        assert!(fit(&spec, &[], Variant::A3, &fixed, None, &FitOptions::default()).is_err());
    }
}
