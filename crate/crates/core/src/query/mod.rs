//! COUNT queries over an ingested table.
//!
//! Queries follow the template
//! `SELECT COUNT([DISTINCT] *) FROM D [GROUP BY attr] [WHERE attr op literal]`.
//! Results are exact and stay on the curator side; only the release module
//! turns them into noised values.

mod dataset;
mod exec;

pub use dataset::{ingest_csv, ColumnSpec, ColumnType, Dataset, IngestError, Schema, Value};
pub use exec::{
    execute, metadata, Aggregate, Comparator, Metadata, Predicate, QueryResult, QuerySpec, Subgroup,
    SubgroupRecords, ALL_LABEL,
};
