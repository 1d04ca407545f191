//! Seeded Monte Carlo harness, bound calculators, configuration and result
//! persistence.

pub mod bounds;
pub mod config;
pub mod sweep;
pub mod trial;
pub mod verify;

pub use bounds::{analytic_error_envelope, hoeffding_bound, wilson_interval, Z95};
pub use config::{ExperimentConfig, Scheme, ValidatedConfig};
pub use sweep::{fmt_sig, run_sweep, strictly_decreasing, SweepResult, SweepRow, CSV_HEADER};
pub use trial::{
    root_codebook_size, run_trial, trial_rng, trial_seed, Message, TrialOutcome, TrialReport, TrialSetup,
};
pub use verify::{run_all, CheckReport};
