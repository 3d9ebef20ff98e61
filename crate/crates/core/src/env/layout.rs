//! Layout plan export: the non-base tables of a catalog, in creation order,
//! with enough provenance to rebuild them on a fresh copy of the dataset.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::{Catalog, Pos, PredColumn, PredJoin, Provenance, TableId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSide {
    pub predicate: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayoutTable {
    Divided {
        name: String,
        predicate: String,
        rows: usize,
    },
    Merged {
        name: String,
        left: String,
        right: String,
        cond: (JoinSide, JoinSide),
        constituents: Vec<String>,
        rows: usize,
    },
}

impl LayoutTable {
    pub fn name(&self) -> &str {
        match self {
            LayoutTable::Divided { name, .. } | LayoutTable::Merged { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LayoutPlan {
    pub tables: Vec<LayoutTable>,
}

impl LayoutPlan {
    /// Describes the current non-base tables of `catalog`.
    pub fn from_catalog(catalog: &Catalog) -> LayoutPlan {
        let name = |id: TableId| catalog.def(id).map(|d| d.name.clone()).unwrap_or_default();
        let side = |pc: PredColumn| JoinSide {
            predicate: catalog.predicate_name(pc.pred).to_owned(),
            pos: pc.pos,
        };
        let tables = catalog
            .tables()
            .skip(1)
            .map(|t| match &t.def.provenance {
                Provenance::Divided(p) => LayoutTable::Divided {
                    name: t.def.name.clone(),
                    predicate: catalog.predicate_name(*p).to_owned(),
                    rows: t.row_count(),
                },
                Provenance::Merged { left, right, cond } => {
                    let (a, b) = cond.endpoints();
                    LayoutTable::Merged {
                        name: t.def.name.clone(),
                        left: name(*left),
                        right: name(*right),
                        cond: (side(a), side(b)),
                        constituents: t
                            .def
                            .constituents
                            .iter()
                            .map(|&p| catalog.predicate_name(p).to_owned())
                            .collect(),
                        rows: t.row_count(),
                    }
                }
                Provenance::Base => unreachable!("base table skipped"),
            })
            .collect();
        LayoutPlan { tables }
    }

    /// Rebuilds the planned tables on top of `catalog`'s `t0`.
    pub fn materialize(&self, catalog: &mut Catalog) -> Result<Vec<TableId>> {
        catalog.reset();
        let mut ids: HashMap<&str, TableId> = HashMap::new();
        let code = |catalog: &Catalog, p: &str| {
            catalog
                .predicate_code(p)
                .ok_or_else(|| Error::UnknownPredicate(p.to_owned()))
        };
        let mut out = Vec::new();
        for t in &self.tables {
            let id = match t {
                LayoutTable::Divided { predicate, .. } => {
                    let p = code(catalog, predicate)?;
                    catalog.divide(p)?
                }
                LayoutTable::Merged {
                    left, right, cond, ..
                } => {
                    let lookup = |n: &str| {
                        ids.get(n).copied().ok_or_else(|| {
                            Error::Config(format!("layout references unknown table `{n}`"))
                        })
                    };
                    let (l, r) = (lookup(left)?, lookup(right)?);
                    let a = PredColumn {
                        pred: code(catalog, &cond.0.predicate)?,
                        pos: cond.0.pos,
                    };
                    let b = PredColumn {
                        pred: code(catalog, &cond.1.predicate)?,
                        pos: cond.1.pos,
                    };
                    catalog.merge_on(l, r, PredJoin::new(a, b))?
                }
            };
            ids.insert(t.name(), id);
            out.push(id);
        }
        Ok(out)
    }

    pub fn total_rows(&self) -> usize {
        self.tables
            .iter()
            .map(|t| match t {
                LayoutTable::Divided { rows, .. } | LayoutTable::Merged { rows, .. } => *rows,
            })
            .sum()
    }
}
