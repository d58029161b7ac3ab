//! Seeded experiment runner: configs in, CSV traces and checked bounds out.

mod bounds;
mod config;
mod run;
mod stats;

pub use bounds::{verify_bound, BoundCheck, BoundFormula};
pub use config::{
    BatchParams, BatchReduction, DimsParams, ExperimentConfig, OnlineParams, OnlineReduction, Output, Pipeline,
    Source, StreamSpec, SCHEMA_VERSION,
};
pub use run::{
    batch_trial, format_label, run_experiment, thresholded_class, BatchTrial, Check, CsvFile, DimRow, Group,
    Relation, Report, TRACE_COLUMNS,
};
pub use stats::{fit_growth_exponent, mean_stderr, GrowthFit};
