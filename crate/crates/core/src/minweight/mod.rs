//! Distance computation, min-weight logical enumeration and search, and
//! exact or sampled onset counting.

mod enumerate;
mod logicals;
mod onset;
mod search;
mod symmetry;

pub use enumerate::enumerate_logicals_exact;
pub use logicals::{LogicalSet, Provenance};
pub use onset::{
    binomial, extrapolate_exponential, onset_exact, onset_exact_odd, onset_sampled, onset_term, min_weight_class, restrictions, OnsetResult,
    SampledOnset,
};
pub use search::{
    coverage_estimate, distance_exact, distance_upper_bound, search_logicals, search_logicals_report, Coverage,
    DistanceResult, SearchOptions, SearchReport, UpperBound,
};
pub use symmetry::{expand_by_symmetry, permute, SymmetryGroup};

#[cfg(test)]
mod tests;
