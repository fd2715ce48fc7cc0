use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::params::{AnsatzParams, Variant};
use crate::error::{Error, Result};
use crate::sampling::{binomial_pmf, transform, write_schema_csv, NeumaierSum};

/// `n` logarithmically spaced points in `[lo, hi)`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln();
    (0..n).map(|i| lo * (r * i as f64 / n as f64).exp()).collect()
}

/// Maximum of `max(x/y, y/x)` over paired curve values, optionally
/// including the ratio of the leading small-rate coefficients.
pub fn max_deviation(pred: &[f64], reference: &[f64], onset_ratio: Option<f64>) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::dim(format!("curves of length {} and {}", pred.len(), reference.len())));
    }
    let mut pairs: Vec<(f64, f64)> = pred.iter().copied().zip(reference.iter().copied()).collect();
    pairs.extend(onset_ratio.map(|r| (r, 1.0)));
    let mut worst = 1.0f64;
    for (x, y) in pairs {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::invalid(format!("curve values must be positive, found {x} and {y}")));
        }
        worst = worst.max(x / y).max(y / x);
    }
    Ok(worst)
}

/// Deviation between two ansatz predictions over `grid`, including the
/// small-rate limit. That limit is the ratio of spectrum values at the
/// lower of the two onsets, and is infinite when the onsets differ.
pub fn ansatz_deviation(pred: &AnsatzParams, reference: &AnsatzParams, n_expanded: u64, rate_divisor: f64, grid: &[f64]) -> Result<f64> {
    let curve = |p: &AnsatzParams| grid.iter().map(|&x| p.predict_rate(n_expanded, x / rate_divisor)).collect::<Vec<_>>();
    let w = pred.w0.min(reference.w0) as f64;
    let (a, b) = (pred.eval(w), reference.eval(w));
    let onset = if a > 0.0 && b > 0.0 { a / b } else { f64::INFINITY };
    max_deviation(&curve(pred), &curve(reference), Some(onset))
}

/// Trials per weight that minimize total trials for a target standard
/// error of the importance-sampling estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub window: Vec<u64>,
    pub trials: BTreeMap<u64, f64>,
    pub predicted_rate: f64,
    /// Share of the predicted rate contributed by the window.
    pub coverage: f64,
}

impl Allocation {
    /// `Σ_w (B_w σ_f(w))²` with `σ_f² = f(1-f)/T_w`.
    pub fn achieved_variance<F: Fn(u64) -> f64>(&self, f: F, n_expanded: u64, q: f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for (&w, &t) in &self.trials {
            let fw = f(w);
            if t > 0.0 {
                acc.add(binomial_pmf(n_expanded, w, q).powi(2) * fw * (1.0 - fw) / t);
            }
        }
        acc.value()
    }
}

/// Minimum contiguous window around the largest contribution that covers
/// at least 95% of the predicted rate.
pub fn contribution_window<F: Fn(u64) -> f64>(f: &F, n_expanded: u64, q: f64) -> Result<(Vec<u64>, f64, f64)> {
    let contrib: Vec<f64> = (0..=n_expanded).map(|w| f(w) * binomial_pmf(n_expanded, w, q)).collect();
    let mut total = NeumaierSum::default();
    contrib.iter().for_each(|&c| total.add(c));
    let total = total.value();
    if !(total > 0.0) {
        return Err(Error::invalid("predicted rate is zero; allocation window is empty"));
    }
    let peak = (0..contrib.len()).max_by(|&a, &b| contrib[a].total_cmp(&contrib[b])).unwrap_or(0);
    let (mut lo, mut hi) = (peak, peak);
    let mut covered = contrib[peak];
    while covered < 0.95 * total {
        let left = if lo > 0 { contrib[lo - 1] } else { -1.0 };
        let right = if hi + 1 < contrib.len() { contrib[hi + 1] } else { -1.0 };
        if left < 0.0 && right < 0.0 {
            break;
        }
        if right >= left {
            hi += 1;
            covered += right;
        } else {
            lo -= 1;
            covered += left;
        }
    }
    Ok(((lo as u64..=hi as u64).collect(), total, covered / total))
}

/// Allocation for an arbitrary spectrum function.
pub fn allocate_trials_for<F: Fn(u64) -> f64>(f: F, n_expanded: u64, q: f64, sigma: f64) -> Result<Allocation> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("target standard error must be positive"));
    }
    let (window, predicted_rate, coverage) = contribution_window(&f, n_expanded, q)?;
    let b: Vec<f64> = window.iter().map(|&w| binomial_pmf(n_expanded, w, q)).collect();
    let fv: Vec<f64> = window.iter().map(|&w| f(w)).collect();
    // T_w = f(1-f) (B_w²/σ²) Σ_k (B_k/B_w)² sqrt(B_w f_k / (B_k f_w))
    //     = f(1-f) (B_w²/σ²) Σ_k u_k / u_w  with u = B^{3/2} f^{1/2}.
    let u: Vec<f64> = b.iter().zip(&fv).map(|(bw, fw)| bw.powf(1.5) * fw.sqrt()).collect();
    let mut usum = NeumaierSum::default();
    u.iter().for_each(|&x| usum.add(x));
    let usum = usum.value();
    let mut trials = BTreeMap::new();
    for (i, &w) in window.iter().enumerate() {
        let t = if u[i] > 0.0 { fv[i] * (1.0 - fv[i]) * b[i] * b[i] / (sigma * sigma) * usum / u[i] } else { 0.0 };
        trials.insert(w, t);
    }
    Ok(Allocation { window, trials, predicted_rate, coverage })
}

pub fn allocate_trials(params: &AnsatzParams, n_expanded: u64, q: f64, sigma: f64) -> Result<Allocation> {
    allocate_trials_for(|w| params.eval(w as f64), n_expanded, q, sigma)
}

/// Seeds a two- or three-parameter ansatz from a distance bound and a
/// pseudo-threshold guess by solving `P(p_pth) = p_pth` with
/// `w0 = ceil(D/2)`. Variant `a2` solves for `f0`; `a3` solves for `gamma`
/// when `f0` is known and for `f0` (with `gamma = w0`) otherwise.
pub fn heuristic_seed(
    distance_bound: u64,
    p_pth: f64,
    n_expanded: u64,
    rate_divisor: f64,
    variant: Variant,
    f0_known: Option<f64>,
    asymptote: f64,
) -> Result<AnsatzParams> {
    if !(p_pth > 0.0 && p_pth < 0.5) {
        return Err(Error::invalid(format!("pseudo-threshold guess {p_pth} outside (0, 1/2)")));
    }
    if distance_bound == 0 {
        return Err(Error::invalid("distance bound must be positive"));
    }
    let w0 = distance_bound.div_ceil(2);
    let q = p_pth / rate_divisor;
    let base = AnsatzParams::new(variant, w0, f0_known.unwrap_or(1e-3), asymptote);
    let (name, lo, hi) = match (variant, f0_known) {
        (Variant::A2, _) | (Variant::A3, None) => ("f0", -700.0, 40.0),
        (Variant::A3, Some(_)) => ("gamma", (1e-6f64).ln(), (1e4f64).ln()),
        _ => return Err(Error::invalid("heuristic seeding supports a2 and a3")),
    };
    let target = p_pth.ln();
    let at = |t: f64| {
        let mut p = base;
        p.set(name, t.exp()).expect("known parameter name");
        (p, p.predict_rate(n_expanded, q).ln() - target)
    };
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (at(a).1, at(b).1);
    if !(ga < 0.0 && gb > 0.0) {
        return Err(Error::NoRoot(format!("no sign change for {name} in [{:e}, {:e}]", lo.exp(), hi.exp())));
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if at(m).1 < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(at(0.5 * (a + b)).0)
}

/// Suggested `(weight, trials)` schedule: log-spaced weights from `w0` up
/// to where the ansatz reaches 90% of its asymptote, each with enough
/// trials to expect `failures_per_point` failures.
pub fn plan_spectrum(params: &AnsatzParams, n_expanded: u64, points: usize, failures_per_point: f64, max_trials: u64) -> Result<Vec<(u64, u64)>> {
    params.validate()?;
    if points == 0 {
        return Err(Error::invalid("at least one point is required"));
    }
    let w0 = params.w0.min(n_expanded);
    let mut hi = w0;
    while hi < n_expanded && params.eval(hi as f64) < 0.9 * params.a {
        hi = (hi * 2).min(n_expanded).max(hi + 1);
    }
    let mut ws: Vec<u64> = if points == 1 {
        vec![w0]
    } else {
        log_grid(w0 as f64, hi as f64, points - 1)
            .into_iter()
            .map(|x| x.round() as u64)
            .chain(std::iter::once(hi))
            .collect()
    };
    ws.dedup();
    Ok(ws
        .into_iter()
        .map(|w| {
            let f = params.eval(w as f64);
            let t = if f > 0.0 { (failures_per_point / f).ceil().min(max_trials as f64) as u64 } else { max_trials };
            (w, t.max(1))
        })
        .collect())
}

/// Predicted rate of `params` at each global rate in `grid`.
pub fn predict_curve(params: &AnsatzParams, n_expanded: u64, rate_divisor: f64, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&p| params.predict_rate(n_expanded, p / rate_divisor)).collect()
}

/// Writes curves sharing a `p` column, e.g. `p,P_pred`.
pub fn write_curves_csv<W: Write>(out: W, grid: &[f64], curves: &[(&str, &[f64])]) -> Result<()> {
    for (name, c) in curves {
        if c.len() != grid.len() {
            return Err(Error::dim(format!("curve {name} has {} points for a grid of {}", c.len(), grid.len())));
        }
    }
    let mut header = vec!["p"];
    header.extend(curves.iter().map(|(n, _)| *n));
    write_schema_csv(
        out,
        &header,
        grid.iter().enumerate().map(|(i, p)| {
            std::iter::once(format!("{p:e}")).chain(curves.iter().map(|(_, c)| format!("{:e}", c[i]))).collect()
        }),
    )
}

/// Transform of a tabulated spectrum.
pub fn predict_tabulated(f: &[f64], q: f64) -> f64 {
    let n = f.len().saturating_sub(1) as u64;
    transform(|w| f[w as usize], n, q)
}
