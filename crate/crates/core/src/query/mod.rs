//! Conjunctive queries over triple patterns, the workload file format, and
//! rewriting onto divided / merged tables.

mod parse;
pub(crate) mod rewrite;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::storage::Pos;

pub use parse::{parse_workload, print_query, print_workload};
pub use rewrite::{
    apply_rewrite, baseline_plan, baseline_rewrite, closure, execute_rewrite, results_equal,
    Assignment, ColumnBinding, RewrittenQuery, RewrittenRef, TableRef,
};

/// `alias.s` or `alias.o`, with the alias given by declaration index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AliasColumn {
    pub alias: usize,
    pub pos: Pos,
}

impl AliasColumn {
    pub fn new(alias: usize, pos: Pos) -> Self {
        AliasColumn { alias, pos }
    }
}

/// Unordered equality between two alias columns; the smaller endpoint is
/// stored first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinCondition {
    left: AliasColumn,
    right: AliasColumn,
}

impl JoinCondition {
    /// Returns `None` when both endpoints are the same column.
    pub fn new(a: AliasColumn, b: AliasColumn) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(JoinCondition { left: a, right: b }),
            std::cmp::Ordering::Greater => Some(JoinCondition { left: b, right: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn left(&self) -> AliasColumn {
        self.left
    }

    pub fn right(&self) -> AliasColumn {
        self.right
    }

    pub fn touches(&self, alias: usize) -> bool {
        self.left.alias == alias || self.right.alias == alias
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriplePattern {
    pub alias: String,
    pub predicate: String,
    pub s_const: Option<String>,
    pub o_const: Option<String>,
}

impl TriplePattern {
    pub fn constant(&self, pos: Pos) -> Option<&str> {
        match pos {
            Pos::S => self.s_const.as_deref(),
            Pos::O => self.o_const.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub name: String,
    pub patterns: Vec<TriplePattern>,
    pub joins: BTreeSet<JoinCondition>,
    pub projections: Vec<AliasColumn>,
}

impl QuerySpec {
    pub fn alias_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn alias_name(&self, alias: usize) -> &str {
        &self.patterns[alias].alias
    }

    pub fn alias_index(&self, name: &str) -> Option<usize> {
        self.patterns.iter().position(|p| p.alias == name)
    }

    pub fn column_name(&self, col: AliasColumn) -> String {
        format!("{}.{}", self.alias_name(col.alias), col.pos.as_str())
    }

    pub fn join_name(&self, j: &JoinCondition) -> String {
        format!("{}={}", self.column_name(j.left), self.column_name(j.right))
    }

    /// Distinct predicates in pattern order.
    pub fn predicates(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.patterns
            .iter()
            .map(|p| p.predicate.as_str())
            .filter(|p| seen.insert(*p))
            .collect()
    }

    /// Whether the alias graph induced by the joins is connected.
    pub fn is_connected(&self) -> bool {
        let n = self.patterns.len();
        if n <= 1 {
            return true;
        }
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for j in &self.joins {
            adj.entry(j.left.alias).or_default().push(j.right.alias);
            adj.entry(j.right.alias).or_default().push(j.left.alias);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for &b in adj.get(&a).into_iter().flatten() {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

impl fmt::Display for QuerySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_query(self))
    }
}
