use statrs::function::gamma::ln_gamma;

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln n! - ln(sqrt(2πn) (n/e)^n)`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// `x ln(x/m) + m - x`, evaluated without cancellation near `x = m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln [C(n,w) q^w (1-q)^(n-w)]`, using the saddle-point decomposition so
/// that large `n` keeps full relative precision.
pub fn ln_binomial_pmf(n: u64, w: u64, q: f64) -> f64 {
    if w > n {
        return f64::NEG_INFINITY;
    }
    let (nf, x) = (n as f64, w as f64);
    if q == 0.0 {
        return if w == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 1.0 {
        return if w == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if w == 0 {
        return nf * (-q).ln_1p();
    }
    if w == n {
        return nf * q.ln();
    }
    let lc = stirlerr(nf) - stirlerr(x) - stirlerr(nf - x) - bd0(x, nf * q) - bd0(nf - x, nf * (1.0 - q));
    let lf = 2.0 * LN_SQRT_2PI + x.ln() + (-x / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln C(n,k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_binomial_pmf(n, k, 0.5) + n as f64 * std::f64::consts::LN_2
}

/// `C(n,w) q^w (1-q)^(n-w)`.
pub fn binomial_pmf(n: u64, w: u64, q: f64) -> f64 {
    ln_binomial_pmf(n, w, q).exp()
}

/// Relative size below which trailing terms are dropped once past the mode.
const TAIL_CUTOFF: f64 = 1e-30;

/// `Σ_w g(w) C(n,w) q^w (1-q)^(n-w)`.
///
/// Terms are accumulated with compensated summation. Past the binomial mode
/// the sum stops once a binomial term falls below `1e-30` of the running
/// total, which assumes `|g| ≤ 1` in the tail.
pub fn transform<G: Fn(u64) -> f64>(g: G, n: u64, q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "rate {q} outside [0, 1]");
    if q == 0.0 {
        return g(0);
    }
    if q == 1.0 {
        return g(n);
    }
    let mode = ((n + 1) as f64 * q).floor() as u64;
    let mut acc = NeumaierSum::default();
    for w in 0..=n {
        let b = binomial_pmf(n, w, q);
        if w > mode && b < TAIL_CUTOFF * acc.value().abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let gw = g(w);
        if gw != 0.0 {
            acc.add(gw * b);
        }
    }
    acc.value()
}
