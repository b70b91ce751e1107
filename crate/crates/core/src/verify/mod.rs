//! One check per quantitative estimate. Every check returns a
//! [`CheckReport`] with measured values, predicted bounds, slacks and the
//! declared pass rule.

mod checks;
mod registry;
mod report;
mod setup;
mod suite;

pub use checks::*;
pub use registry::{lookup, CheckInfo, CHECKS};
pub use report::{CheckReport, CheckStatus, ReportRow};
pub use setup::{
    box_indicator, geometric_times, half_step, middle_cell, random_field, remove_mean, rng, rough_mean_zero,
    smooth_mean_zero, solve_at, time_pairs, Setup,
};
pub use suite::{
    check_ids, run_check, run_check_reported, CheckOptions, DEFAULT_BV_EXPONENT, DEFAULT_EXPONENTS, DEFAULT_RATIOS,
};
