use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{ln_choose, transform};

/// Ansatz family member, named by its parameter count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    A2,
    A3,
    A5,
    A6,
}

impl Variant {
    /// Continuous parameters in optimizer order, excluding `w0`.
    pub fn continuous_names(self) -> &'static [&'static str] {
        match self {
            Variant::A2 => &["f0"],
            Variant::A3 => &["f0", "gamma"],
            Variant::A5 => &["f0", "gamma1", "wc", "gamma2"],
            Variant::A6 => &["f0", "gamma1", "wc", "gamma2", "c"],
        }
    }

    /// Total parameter count including `w0`.
    pub fn parameter_count(self) -> usize {
        self.continuous_names().len() + 1
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a2" | "2" => Ok(Variant::A2),
            "a3" | "3" => Ok(Variant::A3),
            "a5" | "5" => Ok(Variant::A5),
            "a6" | "6" => Ok(Variant::A6),
            other => Err(Error::invalid(format!("unknown ansatz variant {other:?}"))),
        }
    }
}

/// Parameters of one ansatz. Fields a variant does not use are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub variant: Variant,
    pub w0: u64,
    pub f0: f64,
    /// Asymptote `1 - 2^-K`.
    pub a: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub wc: f64,
    pub c: f64,
}

/// `1 - 2^-K`.
pub fn asymptote(num_actions: usize) -> f64 {
    1.0 - 0.5f64.powi(num_actions as i32)
}

fn softplus(t: f64) -> f64 {
    if t > 35.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

impl AnsatzParams {
    /// Defaults following the usual expansion from a lower-order seed:
    /// slopes equal to `w0` and crossover at `2 w0`.
    pub fn new(variant: Variant, w0: u64, f0: f64, a: f64) -> Self {
        let g = w0 as f64;
        Self {
            variant,
            w0,
            f0,
            a,
            gamma: g,
            gamma1: g,
            gamma2: g,
            wc: 2.0 * g,
            c: 2.0,
        }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "w0" => self.w0 as f64,
            "f0" => self.f0,
            "a" => self.a,
            "gamma" => self.gamma,
            "gamma1" => self.gamma1,
            "gamma2" => self.gamma2,
            "wc" => self.wc,
            "c" => self.c,
            other => return Err(Error::invalid(format!("unknown parameter {other:?}"))),
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "w0" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(format!("w0 must be a positive integer, got {value}")));
                }
                self.w0 = value as u64;
            }
            "f0" => self.f0 = value,
            "a" => self.a = value,
            "gamma" => self.gamma = value,
            "gamma1" => self.gamma1 = value,
            "gamma2" => self.gamma2 = value,
            "wc" => self.wc = value,
            "c" => self.c = value,
            other => return Err(Error::invalid(format!("unknown parameter {other:?}"))),
        }
        Ok(())
    }

    /// Natural log of the exponent argument `s(w)`, so that
    /// `f(w) = a (1 - exp(-s/a))`.
    pub fn ln_exponent(&self, w: f64) -> f64 {
        let w0 = self.w0 as f64;
        let lx = (w / w0).ln();
        let ln_f0 = self.f0.ln();
        match self.variant {
            Variant::A2 => ln_f0 + w0 * lx,
            Variant::A3 => ln_f0 + self.gamma * lx,
            Variant::A5 | Variant::A6 => {
                let c = if self.variant == Variant::A5 { 2.0 } else { self.c };
                let lw = softplus(c * (w / self.wc).ln());
                let l0 = softplus(c * (w0 / self.wc).ln());
                ln_f0 + self.gamma1 * lx + (self.gamma2 - self.gamma1) / c * (lw - l0)
            }
        }
    }

    /// Ansatz value at weight `w`; zero below `w0`.
    pub fn eval(&self, w: f64) -> f64 {
        if w < self.w0 as f64 {
            return 0.0;
        }
        let s = self.ln_exponent(w).exp();
        -self.a * (-s / self.a).exp_m1()
    }

    /// `Σ_w f(w) C(N,w) q^w (1-q)^(N-w)`.
    pub fn predict_rate(&self, n_expanded: u64, q: f64) -> f64 {
        transform(|w| self.eval(w as f64), n_expanded, q)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if self.w0 == 0 {
            return Err(Error::invalid("w0 must be positive"));
        }
        positive("f0", self.f0)?;
        if !(self.a > 0.0 && self.a <= 1.0) {
            return Err(Error::invalid(format!("asymptote must lie in (0, 1], got {}", self.a)));
        }
        match self.variant {
            Variant::A2 => Ok(()),
            Variant::A3 => positive("gamma", self.gamma),
            Variant::A5 | Variant::A6 => {
                positive("gamma1", self.gamma1)?;
                positive("gamma2", self.gamma2)?;
                positive("wc", self.wc)?;
                if self.variant == Variant::A6 {
                    positive("c", self.c)?;
                }
                Ok(())
            }
        }
    }
}

/// Ansatz with explicit values at selected weights, for spectra whose
/// lowest weights do not follow the smooth form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridSpectrum {
    pub params: AnsatzParams,
    pub overrides: BTreeMap<u64, f64>,
}

impl HybridSpectrum {
    pub fn eval(&self, w: u64) -> f64 {
        self.overrides.get(&w).copied().unwrap_or_else(|| self.params.eval(w as f64))
    }

    pub fn predict_rate(&self, n_expanded: u64, q: f64) -> f64 {
        transform(|w| self.eval(w), n_expanded, q)
    }
}

/// Which line of the enclosure model to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelLine {
    /// `1 - (1 - C(N-w0, w-w0)/C(N,w))^|F(w0)|`
    Exact,
    /// `1 - exp(-|F(w0)| C(N-w0, w-w0)/C(N,w))`
    Exponential,
    /// `1 - exp(-f0 C(w, w0))`
    Binomial,
    /// `1 - exp(-f0 (w/w0)^w0)`
    PowerLaw,
}

/// Enclosure-model spectrum with `|F(w0)| = f0 C(N, w0)`.
pub fn eval_model(w: u64, w0: u64, f0: f64, n: u64, line: ModelLine) -> Result<f64> {
    if w0 > n || w > n {
        return Err(Error::invalid(format!("weights {w0}, {w} exceed N = {n}")));
    }
    if w < w0 {
        return Ok(0.0);
    }
    let count = f0 * ln_choose(n, w0).exp();
    let ratio = || (ln_choose(n - w0, w - w0) - ln_choose(n, w)).exp();
    Ok(match line {
        ModelLine::Exact => -(count * (-ratio()).ln_1p()).exp_m1(),
        ModelLine::Exponential => -(-count * ratio()).exp_m1(),
        ModelLine::Binomial => -(-f0 * ln_choose(w, w0).exp()).exp_m1(),
        ModelLine::PowerLaw => -(-f0 * (w as f64 / w0 as f64).powf(w0 as f64)).exp_m1(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn a2_direct_value() {
        let p = AnsatzParams::new(Variant::A2, 6, 1e-3, 1.0);
        let expected = 1.0 - (-1e-3f64 * 64.0).exp();
        assert!((p.eval(12.0) - expected).abs() < 1e-15);
        assert!((p.eval(12.0) - 0.0620).abs() < 5e-5);
    }

    #[test]
    fn value_at_onset_and_below() {
        for v in [Variant::A2, Variant::A3, Variant::A5, Variant::A6] {
            let mut p = AnsatzParams::new(v, 5, 0.01, 0.75);
            p.gamma = 7.3;
            p.gamma1 = 6.1;
            p.gamma2 = 9.0;
            p.wc = 17.0;
            p.c = 3.5;
            let at = 0.75 * (1.0 - (-0.01f64 / 0.75).exp());
            assert!((p.eval(5.0) - at).abs() < 1e-15, "{v:?}");
            assert_eq!(p.eval(4.0), 0.0);
        }
    }

    #[test]
    fn a5_with_equal_slopes_is_a3() {
        let mut p5 = AnsatzParams::new(Variant::A5, 4, 1e-4, 0.75);
        p5.gamma1 = 6.5;
        p5.gamma2 = 6.5;
        p5.wc = 11.0;
        let mut p3 = AnsatzParams::new(Variant::A3, 4, 1e-4, 0.75);
        p3.gamma = 6.5;
        for w in 4..400 {
            let (x, y) = (p5.eval(w as f64), p3.eval(w as f64));
            assert!((x - y).abs() <= 1e-14 * y.max(1e-300), "w={w}");
        }
    }

    #[test]
    fn a6_with_c2_matches_a5_exactly() {
        let mut p5 = AnsatzParams::new(Variant::A5, 6, 3e-5, 0.75);
        p5.gamma1 = 7.0;
        p5.gamma2 = 11.0;
        p5.wc = 30.0;
        let p6 = AnsatzParams { variant: Variant::A6, c: 2.0, ..p5 };
        for w in 0..2000 {
            assert_eq!(p5.eval(w as f64).to_bits(), p6.eval(w as f64).to_bits());
        }
    }

    #[test]
    fn predicted_rate_limits() {
        let p = AnsatzParams::new(Variant::A3, 3, 1e-300, 0.5);
        assert!(p.predict_rate(5, 0.1) < 1e-290);
        let p = AnsatzParams::new(Variant::A3, 3, 0.2, 0.5);
        let q = 1e-6;
        let lead = p.predict_rate(50, q) / (ln_choose(50, 3).exp() * q.powi(3));
        assert!((lead - 0.5 * (1.0 - (-0.4f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn binomial_interpolation_tracks_binomial() {
        let w0 = 10.0f64;
        let gamma = w0 + (2.0 * w0 - (2.0 * std::f64::consts::PI * w0).ln()) / std::f64::consts::LN_2;
        let interp = |w: f64| (w / w0).powf(gamma) * ((1.0 + (w / w0).powi(2)) / 2.0).powf((w0 - gamma) / 2.0);
        assert!((interp(w0) - 1.0).abs() < 1e-15);
        // Large-w prefactor of C(w, w0) ~ (w e / w0)^w0 / sqrt(2π w0).
        for w in [100.0, 1000.0, 10_000.0] {
            let asym = (w * std::f64::consts::E / w0).powf(w0) / (2.0 * std::f64::consts::PI * w0).sqrt();
            let r = interp(w) / asym;
            assert!(r > 0.5 && r < 2.0, "w={w} ratio={r}");
        }
    }

    #[test]
    fn model_lines() {
        let n = 100;
        assert!((eval_model(4, 4, 1e-3, n, ModelLine::Binomial).unwrap() - (1.0 - (-1e-3f64).exp())).abs() < 1e-15);
        let at = eval_model(4, 4, 1e-3, n, ModelLine::Exact).unwrap();
        assert!((at - 1e-3).abs() < 1e-3 * 1e-3);
        // Line 2 and line 3 are algebraically equal.
        for w in 4..60 {
            let l2 = eval_model(w, 4, 1e-3, n, ModelLine::Exponential).unwrap();
            let l3 = eval_model(w, 4, 1e-3, n, ModelLine::Binomial).unwrap();
            assert!((l2 - l3).abs() < 1e-10 * l3.max(1e-300));
        }
        assert_eq!(eval_model(3, 4, 0.1, n, ModelLine::PowerLaw).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn exact_and_exponential_lines_obey_envelope(n in 20u64..400, w0 in 1u64..8, dw in 0u64..30, f0 in 1e-6f64..0.5) {
            let w = (w0 + dw).min(n);
            let count = f0 * ln_choose(n, w0).exp();
            let r = (ln_choose(n - w0, w - w0) - ln_choose(n, w)).exp();
            prop_assume!(r <= 0.5);
            let l1 = eval_model(w, w0, f0, n, ModelLine::Exact).unwrap();
            let l2 = eval_model(w, w0, f0, n, ModelLine::Exponential).unwrap();
            // (1-r)^F lies between exp(-Fr-Fr^2) and exp(-Fr).
            let lo = -(-count * r).exp_m1();
            let hi = -(-count * r - count * r * r).exp_m1();
            prop_assert!((l2 - lo).abs() <= 1e-12 * lo.max(1e-300));
            prop_assert!(l1 >= lo * (1.0 - 1e-12) && l1 <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn monotone_in_weight(w0 in 1u64..12, lf0 in -12f64..-1.0, g1 in 0.5f64..20.0, g2 in 0.5f64..20.0, wc in 2f64..100.0, c in 0.5f64..6.0) {
            let mut p = AnsatzParams::new(Variant::A6, w0, lf0.exp(), 0.75);
            p.gamma1 = g1;
            p.gamma2 = g2;
            p.wc = wc;
            p.c = c;
            let mut prev = 0.0;
            for w in 0..600 {
                let v = p.eval(w as f64 * 0.5);
                prop_assert!(v >= prev);
                prop_assert!(v <= p.a);
                prev = v;
            }
        }
    }
}
