//! Benchmark instance schema, loading, validation, statistics and
//! split/filter operations.
//!
//! A dataset file is a JSON array of instance objects. Screenshot paths are
//! relative to the directory holding the file.

mod io;
mod split;
mod stats;
mod types;
mod validate;

pub use io::{load_dataset, load_dataset_with, parse_dataset_str, save_dataset, DatasetError, LoadOptions, SchemaViolation};
pub use split::{filter_out_scenario, partition_scenario, split_dataset, FilterScope};
pub use stats::{dataset_stats, StatsReport};
pub use types::{Dataset, Instance, Platform, ScenarioType, Split};
pub use validate::{check_assets, validate_instance, Rule, Violation};
