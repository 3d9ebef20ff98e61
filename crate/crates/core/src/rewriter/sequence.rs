//! Table sequence generation: every divided and merged table a rewrite of
//! one query could use.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{rewrite::pred_join, JoinCondition, QuerySpec};
use crate::storage::{Catalog, PredCode, PredJoin, TableId, TableKey};

/// How a table of the sequence is built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Build {
    Divide(PredCode),
    Merge {
        left: TableKey,
        right: TableKey,
        cond: PredJoin,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceEntry {
    pub key: TableKey,
    pub build: Build,
    /// Joins needed to build the table (0 for divided tables).
    pub joins: usize,
}

/// One way of producing a merged table from two inputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergeRoute {
    pub left: TableKey,
    pub right: TableKey,
    pub cond: PredJoin,
    pub output: TableKey,
}

/// The sequence for one query, without touching any data.
#[derive(Debug, Clone, Default)]
pub struct SequencePlan {
    pub entries: Vec<SequenceEntry>,
    /// Every merge considered, including ones whose output an earlier route
    /// already produced.
    pub routes: Vec<MergeRoute>,
}

impl SequencePlan {
    pub fn keys(&self) -> Vec<TableKey> {
        self.entries.iter().map(|e| e.key.clone()).collect()
    }

    fn add(&mut self, key: TableKey, build: Build, joins: usize) {
        if !self.entries.iter().any(|e| e.key == key) {
            self.entries.push(SequenceEntry { key, build, joins });
        }
    }

    fn add_route(&mut self, route: MergeRoute) {
        if !self.routes.contains(&route) {
            self.routes.push(route);
        }
    }
}

struct Bound {
    aliases: BTreeSet<usize>,
    conds: BTreeSet<JoinCondition>,
    key: TableKey,
}

pub(crate) fn alias_codes(q: &QuerySpec, catalog: &Catalog) -> Result<Vec<PredCode>> {
    q.patterns
        .iter()
        .map(|p| {
            catalog
                .predicate_code(&p.predicate)
                .ok_or_else(|| Error::UnknownPredicate(p.predicate.clone()))
        })
        .collect()
}

/// Plans the table sequence of `q`: one divided table per predicate, one
/// merged table per join condition, then repeated extension of the
/// previous level's tables by one more single table, up to
/// `patterns - 1` joins. Alias-level duplicates are skipped.
pub fn plan_table_sequence(q: &QuerySpec, catalog: &Catalog) -> Result<SequencePlan> {
    let codes = alias_codes(q, catalog)?;
    let mut plan = SequencePlan::default();
    for &p in &codes {
        plan.add(TableKey::Divided(p), Build::Divide(p), 0);
    }

    let mut seen: Vec<(BTreeSet<usize>, BTreeSet<JoinCondition>)> = Vec::new();
    let mut level: Vec<Bound> = Vec::new();
    for j in &q.joins {
        let (l, r) = (j.left().alias, j.right().alias);
        if l == r || codes[l] == codes[r] {
            continue;
        }
        let pj = pred_join(q, j, catalog).expect("codes resolved");
        let (lk, rk) = (TableKey::Divided(codes[l]), TableKey::Divided(codes[r]));
        let key = TableKey::merged(&lk, &rk, pj);
        plan.add_route(MergeRoute {
            left: lk.clone(),
            right: rk.clone(),
            cond: pj,
            output: key.clone(),
        });
        let bound = (BTreeSet::from([l, r]), BTreeSet::from([*j]));
        if seen.contains(&bound) {
            continue;
        }
        seen.push(bound.clone());
        plan.add(
            key.clone(),
            Build::Merge {
                left: lk,
                right: rk,
                cond: pj,
            },
            1,
        );
        level.push(Bound {
            aliases: bound.0,
            conds: bound.1,
            key,
        });
    }

    let max_joins = q.alias_count().saturating_sub(1);
    for i in 2..=max_joins {
        let mut next = Vec::new();
        for t in &level {
            let preds = t.key.preds();
            for j in &q.joins {
                if t.conds.contains(j) {
                    continue;
                }
                let (l, r) = (j.left().alias, j.right().alias);
                let outside = match (t.aliases.contains(&l), t.aliases.contains(&r)) {
                    (true, false) => r,
                    (false, true) => l,
                    _ => continue,
                };
                if preds.contains(&codes[outside]) {
                    continue;
                }
                let pj = pred_join(q, j, catalog).expect("codes resolved");
                let rk = TableKey::Divided(codes[outside]);
                let key = TableKey::merged(&t.key, &rk, pj);
                plan.add_route(MergeRoute {
                    left: t.key.clone(),
                    right: rk.clone(),
                    cond: pj,
                    output: key.clone(),
                });
                let mut aliases = t.aliases.clone();
                aliases.insert(outside);
                let mut conds = t.conds.clone();
                conds.insert(*j);
                let bound = (aliases, conds);
                if seen.contains(&bound) {
                    continue;
                }
                seen.push(bound.clone());
                plan.add(
                    key.clone(),
                    Build::Merge {
                        left: t.key.clone(),
                        right: rk,
                        cond: pj,
                    },
                    i,
                );
                next.push(Bound {
                    aliases: bound.0,
                    conds: bound.1,
                    key,
                });
            }
        }
        level = next;
    }
    Ok(plan)
}

/// Creates (or reuses) the table for `key` following `build`.
pub fn materialize(catalog: &mut Catalog, key: &TableKey, build: &Build) -> Result<TableId> {
    if let Some(id) = catalog.find(key) {
        return Ok(id);
    }
    match build {
        Build::Divide(p) => catalog.divide(*p),
        Build::Merge { left, right, cond } => {
            let missing = |k: &TableKey| Error::InvalidMerge(format!("input {k:?} does not exist"));
            let l = catalog.find(left).ok_or_else(|| missing(left))?;
            let r = catalog.find(right).ok_or_else(|| missing(right))?;
            catalog.merge_on(l, r, *cond)
        }
    }
}

/// Materializes the table sequence of `q`, reusing tables that already
/// exist, and returns it in creation order.
pub fn generate_table_sequence(q: &QuerySpec, catalog: &mut Catalog) -> Result<Vec<TableId>> {
    let plan = plan_table_sequence(q, catalog)?;
    plan.entries
        .iter()
        .map(|e| materialize(catalog, &e.key, &e.build))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_workload;
    use crate::storage::{PredColumn, Pos, Provenance, Triple};

    fn catalog(preds: &[&str]) -> Catalog {
        let triples: Vec<Triple> = preds
            .iter()
            .map(|p| Triple::new("x", *p, "y"))
            .collect();
        Catalog::from_triples(&triples).unwrap()
    }

    fn query(text: &str) -> QuerySpec {
        parse_workload(text, "w").unwrap().remove(0)
    }

    #[test]
    fn two_predicates_one_join() {
        let mut c = catalog(&["p1", "p2"]);
        let q = query("QUERY q\nPATTERN a p=p1\nPATTERN b p=p2\nJOIN a.s=b.s\nSELECT a.s\nEND\n");
        let seq = generate_table_sequence(&q, &mut c).unwrap();
        assert_eq!(seq.len(), 3);
        let kinds: Vec<_> = seq
            .iter()
            .map(|&t| c.def(t).unwrap().provenance.clone())
            .collect();
        assert_eq!(kinds[0], Provenance::Divided(1));
        assert_eq!(kinds[1], Provenance::Divided(2));
        assert!(matches!(kinds[2], Provenance::Merged { .. }));
        // idempotent
        assert_eq!(generate_table_sequence(&q, &mut c).unwrap(), seq);
        assert_eq!(c.table_count(), 4);
    }

    #[test]
    fn example_one_sequence() {
        let mut c = catalog(&["type", "comment", "topic"]);
        let q = query(
            "QUERY ex1\nPATTERN a p=type o=x\nPATTERN b p=comment\nPATTERN c p=topic\n\
             JOIN a.s=b.s\nJOIN b.o=c.s\nSELECT a.s\nEND\n",
        );
        let plan = plan_table_sequence(&q, &c).unwrap();
        let seq = generate_table_sequence(&q, &mut c).unwrap();
        let preds: Vec<Vec<u32>> = seq
            .iter()
            .map(|&t| c.def(t).unwrap().constituents.clone())
            .collect();
        // type, comment, topic, type+comment, comment+topic, (type+comment)+topic
        assert_eq!(
            preds,
            vec![
                vec![1],
                vec![2],
                vec![3],
                vec![1, 2],
                vec![2, 3],
                vec![1, 2, 3]
            ]
        );
        let joins: Vec<usize> = plan.entries.iter().map(|e| e.joins).collect();
        assert_eq!(joins, vec![0, 0, 0, 1, 1, 2]);
        // both routes to the three-way table are recorded
        assert_eq!(plan.routes.len(), 4);
        let three = &plan.entries[5].key;
        assert_eq!(plan.routes.iter().filter(|r| &r.output == three).count(), 2);
        let ss = PredJoin::new(
            PredColumn { pred: 1, pos: Pos::S },
            PredColumn { pred: 2, pos: Pos::S },
        );
        assert_eq!(c.def(seq[3]).unwrap().conds, BTreeSet::from([ss]));
    }

    #[test]
    fn single_pattern_sequence() {
        let mut c = catalog(&["p1"]);
        let q = query("QUERY q\nPATTERN a p=p1\nSELECT a.s\nEND\n");
        assert_eq!(generate_table_sequence(&q, &mut c).unwrap().len(), 1);
    }

    #[test]
    fn repeated_predicate_is_not_merged_with_itself() {
        let mut c = catalog(&["knows", "name"]);
        let q = query(
            "QUERY q\nPATTERN a p=knows\nPATTERN b p=knows\nPATTERN n p=name\n\
             JOIN a.o=b.s\nJOIN b.o=n.s\nSELECT n.o\nEND\n",
        );
        let seq = generate_table_sequence(&q, &mut c).unwrap();
        // D(knows), D(name), M(knows, name)
        assert_eq!(seq.len(), 3);
    }

    #[test]
    fn unknown_predicate() {
        let c = catalog(&["p1"]);
        let q = query("QUERY q\nPATTERN a p=zzz\nSELECT a.s\nEND\n");
        assert!(matches!(
            plan_table_sequence(&q, &c),
            Err(Error::UnknownPredicate(_))
        ));
    }
}
