//! Replication engine for the simulation study: repeated sampling from
//! structural models, error curves over sample sizes, and a one-shot
//! pipeline writing every table.

mod config;
mod replicate;
mod reproduce;

pub use config::{ReplicationConfig, SpecSource};
pub use replicate::{
    crossing, error_curve, replication_seed, resolve_specs, rows_to_csv, run_replications, Aggregate, CurvePoint,
    ReplicationReport, ReplicationRow, ResolvedSpec, RowStatus,
};
pub use reproduce::{
    random_spec_seed, reproduce_study, Check, Crossing, ModelStability, ReproduceOptions, ReproduceSummary, RANDOM_SET,
};
