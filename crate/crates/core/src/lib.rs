//! Learns a relational storage layout for RDF triples under a fixed query
//! workload.
//!
//! The dataset starts in a single triple table `t0`. An agent chooses
//! *divide* actions (copy one predicate's rows into its own table) and
//! *merge* actions (materialize the join of two such tables). After each
//! action every workload query is answered by the fastest rewrite the
//! current tables allow, and the drop in total workload time is the reward.

pub mod agent;
pub mod env;
pub mod error;
pub mod gen;
pub mod query;
pub mod rewriter;
pub mod storage;

pub use error::{Error, ErrorClass, Result};
