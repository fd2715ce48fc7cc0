use serde::{Deserialize, Serialize};

use super::dense::solve;
use crate::error::{Error, Result};
use crate::sampling::{ln_choose, RateEstimate};

/// Spectrum of two independent subsystems `A` and `B` sharing actions,
/// where a weight-`w` error splits hypergeometrically between them:
/// `f(w) = Σ_w' [fA(w') C(Na,w') C(Nb,w-w') + fB(w') C(Nb,w') C(Na,w-w')] / C(Na+Nb,w)`.
/// Returns values for `w = 0..=Na+Nb`.
pub fn composite_spectrum<FA, FB>(fa: FA, na: u64, fb: FB, nb: u64) -> Vec<f64>
where
    FA: Fn(u64) -> f64,
    FB: Fn(u64) -> f64,
{
    let n = na + nb;
    let fa: Vec<f64> = (0..=na).map(fa).collect();
    let fb: Vec<f64> = (0..=nb).map(fb).collect();
    (0..=n)
        .map(|w| {
            let denom = ln_choose(n, w);
            let mut s = 0.0;
            for wp in w.saturating_sub(nb)..=w.min(na) {
                if fa[wp as usize] != 0.0 {
                    s += fa[wp as usize] * (ln_choose(na, wp) + ln_choose(nb, w - wp) - denom).exp();
                }
            }
            for wp in w.saturating_sub(na)..=w.min(nb) {
                if fb[wp as usize] != 0.0 {
                    s += fb[wp as usize] * (ln_choose(nb, wp) + ln_choose(na, w - wp) - denom).exp();
                }
            }
            s
        })
        .collect()
}

/// `P(p) = p^(d/2) exp(a + b p + c p²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PowerLaw {
    pub fn eval(&self, p: f64) -> f64 {
        (0.5 * self.d * p.ln() + self.a + self.b * p + self.c * p * p).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub law: PowerLaw,
    /// Weighted residual sum in log space.
    pub chi2: f64,
    pub dof: usize,
}

/// Candidate exponents around a distance estimate, always containing
/// `2 ceil(D/2)`.
pub fn powerlaw_d_grid(distance: u64) -> Vec<f64> {
    let lo = distance.saturating_sub(2).max(1);
    let mut g: Vec<u64> = (lo..=distance + 3).collect();
    g.push(2 * distance.div_ceil(2));
    g.sort_unstable();
    g.dedup();
    g.into_iter().map(|d| d as f64).collect()
}

/// Weighted linear least squares for `(a, b, c)` at each `d` in `d_grid`,
/// on points `(p, P, σ_P)` with `P > 0`, keeping the best `d`.
pub fn fit_powerlaw_points(points: &[(f64, f64, f64)], d_grid: &[f64]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(p, v, s)| *p > 0.0 && *v > 0.0 && *s > 0.0)
        .map(|&(p, v, s)| (p, v.ln(), s / v))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Underdetermined { points: pts.len(), free: 4 });
    }
    if d_grid.is_empty() {
        return Err(Error::invalid("empty exponent grid"));
    }
    let scale = pts.iter().map(|t| t.0).fold(0.0, f64::max);
    let mut best: Option<PowerLawFit> = None;
    for &d in d_grid {
        let mut m = vec![vec![0.0; 3]; 3];
        let mut rhs = vec![0.0; 3];
        for &(p, y, s) in &pts {
            let t = p / scale;
            let basis = [1.0, t, t * t];
            let r = y - 0.5 * d * p.ln();
            let wgt = 1.0 / (s * s);
            for i in 0..3 {
                rhs[i] += wgt * basis[i] * r;
                for j in 0..3 {
                    m[i][j] += wgt * basis[i] * basis[j];
                }
            }
        }
        let Some(x) = solve(&m, &rhs) else { continue };
        let law = PowerLaw { d, a: x[0], b: x[1] / scale, c: x[2] / (scale * scale) };
        let chi2 = pts
            .iter()
            .map(|&(p, y, s)| ((y - law.eval(p).ln()) / s).powi(2))
            .sum::<f64>();
        if best.is_none_or(|b| chi2 < b.chi2) {
            best = Some(PowerLawFit { law, chi2, dof: pts.len() - 4 });
        }
    }
    best.ok_or_else(|| Error::invalid("power-law normal equations are singular"))
}

/// Power-law fit of direct-sampling rates; points without failures are
/// dropped since the fit is in log space.
pub fn fit_powerlaw(rates: &[RateEstimate], d_grid: &[f64]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64, f64)> = rates
        .iter()
        .filter(|r| r.trials > 0 && r.failures > 0)
        .map(|r| (r.p, r.phat(), r.stderr()))
        .collect();
    fit_powerlaw_points(&pts, d_grid)
}
