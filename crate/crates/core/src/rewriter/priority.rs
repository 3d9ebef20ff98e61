//! Timed priority lists and the rewrite policy built on them.

use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::query::{
    apply_rewrite, baseline_rewrite, closure, execute_rewrite, Assignment, JoinCondition,
    QuerySpec, RewrittenQuery, TableRef,
};
use crate::rewriter::enumerate::{enumerate_shapes, ItemShape};
use crate::storage::{Catalog, MeasureMode, Measurement, TableId, TableKey};

/// One feasible rewrite of a query.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityItem {
    /// Tables the rewrite reads.
    pub tables: BTreeSet<TableId>,
    pub assignment: Assignment,
    pub rewritten: RewrittenQuery,
    /// Mean seconds, or cost units in cost-model mode. `None` until timed.
    pub execute_time: Option<f64>,
    pub measurement: Option<Measurement>,
    /// Closed set of join conditions the item's tables already enforce.
    pub choose_info: BTreeSet<JoinCondition>,
}

impl PriorityItem {
    pub fn uses_base(&self) -> bool {
        self.tables.contains(&TableId(0))
    }

    pub fn join_count(&self) -> usize {
        self.rewritten.join_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorityList {
    pub query: String,
    /// Ascending by `execute_time`.
    pub items: Vec<PriorityItem>,
}

/// Turns a key-level shape into an assignment over existing tables.
pub fn resolve_shape(shape: &ItemShape, catalog: &Catalog) -> Option<Assignment> {
    let refs = shape
        .refs
        .iter()
        .map(|(key, aliases)| {
            catalog.find(key).map(|table| TableRef {
                table,
                aliases: aliases.clone(),
            })
        })
        .collect::<Option<Vec<_>>>()?;
    Some(Assignment { refs })
}

/// Untimed priority items for `q` over the tables of `seq` (plus `t0`).
pub fn enumerate_priority_items(
    seq: &[TableId],
    q: &QuerySpec,
    catalog: &Catalog,
) -> Result<Vec<PriorityItem>> {
    let keys = seq
        .iter()
        .map(|&t| catalog.def(t).map(|d| d.key()))
        .collect::<Result<Vec<TableKey>>>()?;
    enumerate_shapes(q, &keys, catalog)?
        .iter()
        .map(|shape| {
            let assignment = resolve_shape(shape, catalog).ok_or_else(|| {
                Error::InvalidRewrite(format!("shape {shape:?} references a missing table"))
            })?;
            let rewritten = apply_rewrite(q, &assignment, catalog)?;
            Ok(PriorityItem {
                tables: assignment.tables(),
                assignment,
                rewritten,
                execute_time: None,
                measurement: None,
                choose_info: BTreeSet::new(),
            })
        })
        .collect()
}

/// Times every item (mean of `repeats` runs, or one cost-model run), fills
/// in `choose_info` and sorts ascending by time. Ties keep input order.
pub fn build_priority_list(
    q: &QuerySpec,
    mut items: Vec<PriorityItem>,
    catalog: &Catalog,
    mode: MeasureMode,
    repeats: usize,
) -> Result<PriorityList> {
    for (idx, item) in items.iter_mut().enumerate() {
        let (_, m) = execute_rewrite(catalog, &item.rewritten, mode, repeats).map_err(|e| {
            Error::ItemExecution {
                query: q.name.clone(),
                item: idx,
                source: Box::new(e),
            }
        })?;
        item.execute_time = Some(m.value(mode));
        item.measurement = Some(m);
        item.choose_info = closure(item.rewritten.internal_joins.iter().copied());
    }
    items.sort_by(|a, b| {
        let (x, y) = (a.execute_time.unwrap(), b.execute_time.unwrap());
        x.total_cmp(&y)
    });
    Ok(PriorityList {
        query: q.name.clone(),
        items,
    })
}

/// Rewrite of the fastest item whose tables are all available; the raw
/// query over `t0` when none is.
pub fn select_rewrite(q: &QuerySpec, available: &BTreeSet<TableId>, list: &PriorityList) -> RewrittenQuery {
    list.items
        .iter()
        .find(|item| item.tables.is_subset(available))
        .map(|item| item.rewritten.clone())
        .unwrap_or_else(|| baseline_rewrite(q))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    rank: usize,
    table_ids: String,
    join_count: usize,
    execute_time: f64,
    rewritten_query_text: &'a str,
}

impl PriorityList {
    /// CSV with columns `rank, table_ids, join_count, execute_time,
    /// rewritten_query_text`.
    pub fn write_csv<W: Write>(&self, catalog: &Catalog, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (rank, item) in self.items.iter().enumerate() {
            let ids: Vec<String> = item.tables.iter().map(|t| t.to_string()).collect();
            let sql = item.rewritten.to_sql(catalog);
            w.serialize(CsvRow {
                rank: rank + 1,
                table_ids: ids.join(" "),
                join_count: item.join_count(),
                execute_time: item.execute_time.unwrap_or(f64::NAN),
                rewritten_query_text: &sql,
            })?;
        }
        w.flush().map_err(|e| Error::io("priority list", e))?;
        Ok(())
    }
}
