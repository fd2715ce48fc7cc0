//! Splitting estimates of low logical failure rates: Metropolis chains
//! over failing configurations at a ladder of rates, Bennett ratios
//! between neighbouring rates, and multi-seeded orchestration.

mod chain;
mod job;
mod multi;
mod pi;
mod ratio;
mod schedule;

pub use chain::{
    g_kernel, metropolis_step, metropolis_update, run_chain, transition_probability, ChainParams, ChainRecord,
    ChainState, FailureOracle, KernelStats, Step,
};
pub use job::SplitJob;
pub use multi::{
    chain_diagnostics, multi_seeded_split, read_split_csv, sample_failing_configs, write_split_csv, ChainDiagnostics,
    RateSummary, Seeding, SplitEstimate, SplitInstance, SplitOptions, SplitProvenance, SplitRun, BOUNDARY_CONVENTION,
    SPLIT_CSV_HEADER,
};
pub use pi::{pi_weight, PiTable};
pub use ratio::{bennett_ratio, estimate_ratio, RatioEstimate};
pub use schedule::{build_schedule, RateSchedule};
