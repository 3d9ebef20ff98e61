//! Enumerates, times and ranks the rewrites of each workload query.

pub mod enumerate;
pub mod priority;
pub mod sequence;

pub use enumerate::{bindings, enumerate_shapes, weight, ItemShape};
pub use priority::{
    build_priority_list, enumerate_priority_items, resolve_shape, select_rewrite, PriorityItem,
    PriorityList,
};
pub use sequence::{
    generate_table_sequence, materialize, plan_table_sequence, Build, MergeRoute, SequenceEntry,
    SequencePlan,
};
