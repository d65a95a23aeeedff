//! Configured, replicated experiments and their reports.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{load_config, parse_config, save_config, AcquisitionConfig, Algorithm, ExperimentConfig, Testbed};
pub use report::{aggregate, collect_results, report, AggregateReport, GroupSummary, MeanCi};
pub use runner::{replication_seed, run_experiment, run_replication, ReplicationResult};
