//! Failure-spectrum model and ansatz family, weighted least-squares
//! fitting, trial allocation and fit-quality metrics.

mod composite;
mod dense;
mod fit;
mod params;
mod planning;
mod simplex;

pub use composite::{composite_spectrum, fit_powerlaw, fit_powerlaw_points, powerlaw_d_grid, PowerLaw, PowerLawFit};
pub use fit::{chi_squared, data_points, fit, parse_fixed, pseudo_stderr, DataPoint, FitOptions, FitResult, FixedParams, PointKind};
pub use params::{asymptote, eval_model, AnsatzParams, HybridSpectrum, ModelLine, Variant};
pub use planning::{
    allocate_trials, allocate_trials_for, ansatz_deviation, contribution_window, heuristic_seed, log_grid, max_deviation,
    plan_spectrum, predict_curve, predict_tabulated, write_curves_csv, Allocation,
};
pub use simplex::{nelder_mead, Simplex};
