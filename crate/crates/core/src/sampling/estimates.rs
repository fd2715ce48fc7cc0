use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::transform::{binomial_pmf, NeumaierSum};
use crate::error::{Error, Result};

/// Wald standard error `sqrt(f(1-f)/T)`.
pub fn wald_stderr(failures: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let f = failures as f64 / trials as f64;
    (f * (1.0 - f) / trials as f64).sqrt()
}

/// Per-weight trial and failure counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub weights: Vec<u64>,
    pub trials: Vec<u64>,
    pub failures: Vec<u64>,
    pub n_expanded: u64,
    /// Large-weight asymptote `1 - 2^-K`.
    pub asymptote: f64,
}

impl SpectrumEstimate {
    pub fn new(n_expanded: u64, num_actions: usize) -> Self {
        Self {
            weights: Vec::new(),
            trials: Vec::new(),
            failures: Vec::new(),
            n_expanded,
            asymptote: 1.0 - 0.5f64.powi(num_actions as i32),
        }
    }

    /// Adds counts for `w`, merging with an existing entry.
    pub fn record(&mut self, w: u64, trials: u64, failures: u64) -> Result<()> {
        if failures > trials {
            return Err(Error::invalid(format!("{failures} failures exceed {trials} trials at w={w}")));
        }
        match self.weights.binary_search(&w) {
            Ok(i) => {
                self.trials[i] += trials;
                self.failures[i] += failures;
            }
            Err(i) => {
                self.weights.insert(i, w);
                self.trials.insert(i, trials);
                self.failures.insert(i, failures);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn index_of(&self, w: u64) -> Option<usize> {
        self.weights.binary_search(&w).ok()
    }

    pub fn fhat(&self, i: usize) -> f64 {
        self.failures[i] as f64 / self.trials[i] as f64
    }

    pub fn stderr(&self, i: usize) -> f64 {
        wald_stderr(self.failures[i], self.trials[i])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_schema_csv(
            out,
            &["weight", "trials", "failures", "fhat", "stderr"],
            (0..self.len()).filter(|&i| self.trials[i] > 0).map(|i| {
                vec![
                    self.weights[i].to_string(),
                    self.trials[i].to_string(),
                    self.failures[i].to_string(),
                    fmt_f64(self.fhat(i)),
                    fmt_f64(self.stderr(i)),
                ]
            }),
        )
    }

    pub fn read_csv<R: Read>(input: R, n_expanded: u64, num_actions: usize) -> Result<Self> {
        let mut spec = Self::new(n_expanded, num_actions);
        for row in read_schema_csv(input, &["weight", "trials", "failures"])? {
            spec.record(parse_u64(&row[0])?, parse_u64(&row[1])?, parse_u64(&row[2])?)?;
        }
        Ok(spec)
    }
}

/// Direct-sampling counts at one global rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub p: f64,
    pub trials: u64,
    pub failures: u64,
    /// Mean expanded weight of the sampled errors.
    pub mean_weight: f64,
}

impl RateEstimate {
    pub fn phat(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }

    pub fn stderr(&self) -> f64 {
        wald_stderr(self.failures, self.trials)
    }
}

pub fn write_rates_csv<W: Write>(rates: &[RateEstimate], out: W) -> Result<()> {
    write_schema_csv(
        out,
        &["p", "trials", "failures", "phat", "stderr"],
        rates.iter().filter(|r| r.trials > 0).map(|r| {
            vec![
                fmt_f64(r.p),
                r.trials.to_string(),
                r.failures.to_string(),
                fmt_f64(r.phat()),
                fmt_f64(r.stderr()),
            ]
        }),
    )
}

pub fn read_rates_csv<R: Read>(input: R) -> Result<Vec<RateEstimate>> {
    read_schema_csv(input, &["p", "trials", "failures"])?
        .into_iter()
        .map(|row| {
            Ok(RateEstimate {
                p: parse_f64(&row[0])?,
                trials: parse_u64(&row[1])?,
                failures: parse_u64(&row[2])?,
                mean_weight: f64::NAN,
            })
        })
        .collect()
}

/// Result of the windowed importance-sampling estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    pub stat_err: f64,
    /// Binomial mass of the weights outside the window, an upper bound on
    /// the omitted contribution since `f ≤ 1`.
    pub missing_mass_bound: f64,
}

/// `Σ_{w ∈ W} f̂(w) B_w` with `B_w = C(N,w) q^w (1-q)^(N-w)`.
pub fn importance_estimate(spec: &SpectrumEstimate, q: f64, window: &[u64]) -> Result<ImportanceEstimate> {
    let n = spec.n_expanded;
    let mut est = NeumaierSum::default();
    let mut var = NeumaierSum::default();
    let mut inside = NeumaierSum::default();
    let mut seen = std::collections::BTreeSet::new();
    for &w in window {
        if !seen.insert(w) {
            continue;
        }
        let i = spec
            .index_of(w)
            .ok_or_else(|| Error::invalid(format!("weight {w} not sampled")))?;
        let b = binomial_pmf(n, w, q);
        est.add(spec.fhat(i) * b);
        var.add((spec.stderr(i) * b).powi(2));
        inside.add(b);
    }
    Ok(ImportanceEstimate {
        estimate: est.value(),
        stat_err: var.value().sqrt(),
        missing_mass_bound: (1.0 - inside.value()).max(0.0),
    })
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub(crate) fn parse_u64(s: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| Error::invalid(format!("expected an integer, found {s:?}")))
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::invalid(format!("expected a number, found {s:?}")))
}

/// Writes a CSV preceded by a `# schema:` comment naming the columns.
pub fn write_schema_csv<W: Write, I: IntoIterator<Item = Vec<String>>>(mut out: W, header: &[&str], rows: I) -> Result<()> {
    writeln!(out, "# schema: {}", header.join(","))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_schema_csv`], returning rows reordered to
/// the `required` columns.
pub fn read_schema_csv<R: Read>(input: R, required: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::invalid(format!("CSV lacks column {name:?}")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(idx.iter().map(|&i| rec.get(i).unwrap_or("").to_owned()).collect());
    }
    Ok(rows)
}
