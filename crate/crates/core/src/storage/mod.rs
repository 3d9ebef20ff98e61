//! In-memory triple tables: the base table `t0`, vertical partitions
//! (divide) and materialized joins (merge), plus a query executor.

pub mod catalog;
pub mod exec;
pub mod ntriples;

pub use catalog::{
    constituent_prefix, Catalog, ColumnRef, MergeCondition, Pos, PredCode, PredColumn, PredJoin,
    Provenance, Table, TableDef, TableId, TableKey, TermId, ABSENT_TERM,
};
pub use exec::{execute, MeasureMode, Measurement, PhysicalQuery, ResultSet, Scan, Slot};
pub use ntriples::{format_triple, parse_ntriples, Triple};
