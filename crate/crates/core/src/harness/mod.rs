//! Seeded experiment execution and CSV persistence.
//!
//! Replication `j` of an experiment owns the seed `derive_seed(master, j)`;
//! its instance, run stream and tuning pilots use child seeds 0, 1 and 2 of
//! that. Replications and grid cells run through [`crate::Execution`] and are
//! collected in a fixed order, so the written CSV bytes depend only on the
//! spec.

pub mod config;
pub mod csvio;
pub mod experiment;
pub mod run;
pub mod summary;

pub use experiment::{execute, run_experiment, ExperimentKind, ExperimentResults, ExperimentSpec, Method, ScheduleChoice};
pub use run::{run_single, run_single_with, time_to_eps, RunOptions, TimeToEps};
pub use summary::{gap_reference, quantile, summarize_quantiles, summarize_rows, QuantileSummary};
