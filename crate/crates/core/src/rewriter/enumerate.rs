//! Priority item enumeration: every set of tables from a sequence whose
//! constituents exactly cover a query's patterns.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{AliasColumn, JoinCondition, QuerySpec};
use crate::rewriter::sequence::alias_codes;
use crate::storage::{Catalog, PredCode, TableId, TableKey};

/// Queries are tracked with one bit per pattern.
pub const MAX_PATTERNS: usize = 64;

/// Weight of a table in the cover search: its number of constituents.
pub fn weight(catalog: &Catalog, t: TableId) -> Result<usize> {
    let def = catalog.def(t)?;
    if def.is_base() {
        return Err(Error::InvalidRewrite("t0 has no weight".to_owned()));
    }
    Ok(def.constituents.len())
}

/// One feasible rewrite described by table keys, independent of table ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemShape {
    /// `(table, aliases served)`; `TableKey::Base` serves one alias.
    pub refs: Vec<(TableKey, BTreeSet<usize>)>,
}

impl ItemShape {
    pub fn uses_base(&self) -> bool {
        self.refs.iter().any(|(k, _)| *k == TableKey::Base)
    }

    pub fn keys(&self) -> BTreeSet<TableKey> {
        self.refs.iter().map(|(k, _)| k.clone()).collect()
    }

    pub fn baseline(q: &QuerySpec) -> ItemShape {
        ItemShape {
            refs: (0..q.alias_count())
                .map(|a| (TableKey::Base, BTreeSet::from([a])))
                .collect(),
        }
    }
}

/// Alias sets of `q` a table with `key` can serve.
pub fn bindings(q: &QuerySpec, key: &TableKey, codes: &[PredCode]) -> Vec<BTreeSet<usize>> {
    let with_pred = |p: PredCode| -> Vec<usize> {
        codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == p)
            .map(|(a, _)| a)
            .collect()
    };
    match key {
        TableKey::Base => Vec::new(),
        TableKey::Divided(p) => with_pred(*p)
            .into_iter()
            .map(|a| BTreeSet::from([a]))
            .collect(),
        TableKey::Merged { preds, conds } => {
            let preds: Vec<PredCode> = preds.iter().copied().collect();
            let mut out = Vec::new();
            let mut chosen = vec![usize::MAX; preds.len()];
            fn rec(
                i: usize,
                preds: &[PredCode],
                chosen: &mut Vec<usize>,
                options: &dyn Fn(PredCode) -> Vec<usize>,
                accept: &dyn Fn(&[usize]) -> bool,
                out: &mut Vec<BTreeSet<usize>>,
            ) {
                if i == preds.len() {
                    if accept(chosen) {
                        let set: BTreeSet<usize> = chosen.iter().copied().collect();
                        if !out.contains(&set) {
                            out.push(set);
                        }
                    }
                    return;
                }
                for a in options(preds[i]) {
                    if chosen[..i].contains(&a) {
                        continue;
                    }
                    chosen[i] = a;
                    rec(i + 1, preds, chosen, options, accept, out);
                }
            }
            let accept = |chosen: &[usize]| {
                let alias_of = |p: PredCode| chosen[preds.iter().position(|&x| x == p).unwrap()];
                conds.iter().all(|pj| {
                    let (a, b) = pj.endpoints();
                    JoinCondition::new(
                        AliasColumn::new(alias_of(a.pred), a.pos),
                        AliasColumn::new(alias_of(b.pred), b.pos),
                    )
                    .is_some_and(|j| q.joins.contains(&j))
                })
            };
            rec(0, &preds, &mut chosen, &with_pred, &accept, &mut out);
            out
        }
    }
}

fn mask(aliases: &BTreeSet<usize>) -> u64 {
    aliases.iter().fold(0, |m, &a| m | (1 << a))
}

struct Candidate {
    key: TableKey,
    aliases: BTreeSet<usize>,
    mask: u64,
    weight: usize,
}

/// All exact covers of the aliases of `q` by tables in `keys` (in
/// depth-first order over the sequence), followed by the `t0`-inclusive
/// items: the all-`t0` baseline, and, when the all-single-tables cover
/// exists, that cover with each one alias moved back onto `t0`.
pub fn enumerate_shapes(q: &QuerySpec, keys: &[TableKey], catalog: &Catalog) -> Result<Vec<ItemShape>> {
    if q.alias_count() > MAX_PATTERNS {
        return Err(Error::InvalidQuery {
            query: q.name.clone(),
            message: format!("more than {MAX_PATTERNS} patterns"),
        });
    }
    let codes = alias_codes(q, catalog)?;
    let cands: Vec<Candidate> = keys
        .iter()
        .filter(|k| **k != TableKey::Base)
        .flat_map(|k| {
            bindings(q, k, &codes).into_iter().map(|aliases| Candidate {
                key: k.clone(),
                mask: mask(&aliases),
                weight: aliases.len(),
                aliases,
            })
        })
        .collect();
    let weight_sum = q.alias_count();

    let mut covers: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    fn dfs(
        start: usize,
        used: u64,
        list_weight: usize,
        weight_sum: usize,
        cands: &[Candidate],
        stack: &mut Vec<usize>,
        covers: &mut Vec<Vec<usize>>,
    ) {
        for j in start..cands.len() {
            let c = &cands[j];
            if c.mask & used != 0 || list_weight + c.weight > weight_sum {
                continue;
            }
            stack.push(j);
            if list_weight + c.weight == weight_sum {
                covers.push(stack.clone());
            } else {
                dfs(j + 1, used | c.mask, list_weight + c.weight, weight_sum, cands, stack, covers);
            }
            stack.pop();
        }
    }
    dfs(0, 0, 0, weight_sum, &cands, &mut stack, &mut covers);

    let mut shapes: Vec<ItemShape> = covers
        .iter()
        .map(|cover| ItemShape {
            refs: cover
                .iter()
                .map(|&i| (cands[i].key.clone(), cands[i].aliases.clone()))
                .collect(),
        })
        .collect();

    let basic = shapes
        .iter()
        .find(|s| s.refs.iter().all(|(k, _)| matches!(k, TableKey::Divided(_))))
        .cloned();
    let mut with_base = vec![ItemShape::baseline(q)];
    if let Some(basic) = basic {
        for i in 0..basic.refs.len() {
            let mut variant = basic.clone();
            variant.refs[i].0 = TableKey::Base;
            if !with_base.contains(&variant) {
                with_base.push(variant);
            }
        }
    }
    shapes.extend(with_base);
    Ok(shapes)
}
