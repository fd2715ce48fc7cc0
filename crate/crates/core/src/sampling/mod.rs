//! Direct and fixed-weight Monte Carlo, the binomial transform, and the
//! windowed importance-sampling estimator.

mod estimates;
mod mc;
mod transform;

pub use estimates::{
    importance_estimate, read_rates_csv, read_schema_csv, wald_stderr, write_rates_csv, write_schema_csv,
    ImportanceEstimate, RateEstimate, SpectrumEstimate,
};
pub use mc::{
    draw_weight, run_chunks, run_until, sample_css_correlated, sample_rate, sample_rate_until, sample_spectrum,
    sample_weight, sample_weight_until, Noise, RateSampler, Tally, CHUNK,
};
pub use transform::{binomial_pmf, ln_binomial_pmf, ln_choose, transform, NeumaierSum};
