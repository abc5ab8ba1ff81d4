//! Data ingestion, the online train/test protocol, reports and snapshots.

mod config;
mod data;
mod experiment;
mod snapshot;

pub use config::{CombinerKind, Normalization, RunConfig};
pub use data::{load_csv, load_csv_columns, normalize_minmax, ColumnRef, MinMax, SeriesFrame};
pub use experiment::{
    run_experiment, run_experiment_with_state, ForecastReport, ModelState, Segment, StepRecord,
    Summary,
};
pub use snapshot::{
    snapshot_from_bytes, snapshot_load, snapshot_save, snapshot_to_bytes, SNAPSHOT_VERSION,
};
