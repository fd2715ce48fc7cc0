use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::chain::ChainParams;
use super::multi::{Seeding, SplitOptions};
use crate::decoders::DecoderConfig;
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;

fn default_epsilon() -> f64 {
    0.25
}

fn default_lambda() -> f64 {
    2.0
}

fn default_one() -> usize {
    1
}

fn default_t_init() -> u64 {
    10_000
}

fn default_p0_failures() -> u64 {
    1000
}

fn default_cache() -> usize {
    1 << 16
}

/// Splitting job as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitJob {
    pub system: PathBuf,
    #[serde(default)]
    pub decoder: DecoderConfig,
    pub p0: f64,
    pub targets: Vec<f64>,
    /// Distance for the schedule rule; computed when absent.
    #[serde(default)]
    pub distance: Option<usize>,
    #[serde(rename = "L", alias = "l", default = "default_one")]
    pub l: usize,
    #[serde(rename = "M", alias = "m", default = "default_one")]
    pub m: usize,
    #[serde(rename = "T_init", alias = "t_init", default = "default_t_init")]
    pub t_init: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget_seconds: Option<f64>,
    #[serde(default = "default_p0_failures")]
    pub p0_failures: u64,
    #[serde(default)]
    pub p0_max_trials: Option<u64>,
    #[serde(default)]
    pub max_samples: Option<u64>,
    #[serde(default = "default_cache")]
    pub cache_capacity: usize,
    /// Columns of a configuration that seeds every chain.
    #[serde(default)]
    pub fixed_seed: Option<Vec<usize>>,
}

impl SplitJob {
    pub fn from_json(text: &str) -> Result<Self> {
        let job: SplitJob = serde_json::from_str(text)?;
        if job.budget_seconds.is_some_and(|b| !(b > 0.0)) {
            return Err(Error::invalid("budget_seconds must be positive"));
        }
        Ok(job)
    }

    pub fn options(&self, distance: usize, num_faults: usize) -> Result<SplitOptions> {
        let mut o = SplitOptions::new(self.p0, self.targets.clone(), distance);
        o.l = self.l;
        o.m = self.m;
        o.chain = ChainParams {
            t_init: self.t_init,
            epsilon: self.epsilon,
            lambda: self.lambda,
            cache_capacity: self.cache_capacity,
            max_samples: self.max_samples.unwrap_or(u64::MAX),
            deadline: None,
        };
        o.p0_failures = self.p0_failures;
        if let Some(t) = self.p0_max_trials {
            o.p0_max_trials = t;
        }
        o.budget = self.budget_seconds.map(Duration::from_secs_f64);
        if let Some(cols) = &self.fixed_seed {
            if cols.iter().any(|&j| j >= num_faults) {
                return Err(Error::dim("fixed seed column out of range"));
            }
            o.seeding = Seeding::Fixed(BitVec::from_indices(num_faults, cols));
        }
        Ok(o)
    }
}
