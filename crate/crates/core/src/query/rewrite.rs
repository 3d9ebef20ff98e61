use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{AliasColumn, JoinCondition, QuerySpec};
use crate::storage::{
    execute, Catalog, ColumnRef, MeasureMode, Measurement, PhysicalQuery, Pos, PredColumn,
    PredJoin, Provenance, ResultSet, Scan, TableId,
};

/// One table reference of a rewrite and the aliases it serves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TableRef {
    pub table: TableId,
    pub aliases: BTreeSet<usize>,
}

/// Which table serves which aliases.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub refs: Vec<TableRef>,
}

impl Assignment {
    /// Every alias served by its own scan of `t0`.
    pub fn baseline(q: &QuerySpec) -> Assignment {
        Assignment {
            refs: (0..q.alias_count())
                .map(|a| TableRef {
                    table: TableId(0),
                    aliases: BTreeSet::from([a]),
                })
                .collect(),
        }
    }

    /// Builds an assignment from `map[alias] = table`. Aliases mapped to the
    /// same merged table share one reference; `t0` and divided tables get one
    /// reference per alias.
    pub fn from_map(q: &QuerySpec, map: &[TableId], catalog: &Catalog) -> Result<Assignment> {
        if map.len() != q.alias_count() {
            return Err(Error::InvalidRewrite(format!(
                "assignment covers {} aliases, query has {}",
                map.len(),
                q.alias_count()
            )));
        }
        let mut refs: Vec<TableRef> = Vec::new();
        for (alias, &table) in map.iter().enumerate() {
            let shared = matches!(catalog.def(table)?.provenance, Provenance::Merged { .. });
            match refs.iter_mut().find(|r| shared && r.table == table) {
                Some(r) => {
                    r.aliases.insert(alias);
                }
                None => refs.push(TableRef {
                    table,
                    aliases: BTreeSet::from([alias]),
                }),
            }
        }
        Ok(Assignment { refs })
    }

    pub fn tables(&self) -> BTreeSet<TableId> {
        self.refs.iter().map(|r| r.table).collect()
    }
}

/// Physical columns holding `alias.s` and `alias.o` inside a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnBinding {
    pub alias: usize,
    pub s: usize,
    pub o: usize,
}

impl ColumnBinding {
    fn column(&self, pos: Pos) -> usize {
        match pos {
            Pos::S => self.s,
            Pos::O => self.o,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewrittenRef {
    pub table: TableId,
    pub label: String,
    pub bindings: Vec<ColumnBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualFilter {
    pub table_ref: usize,
    pub column: usize,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualJoin {
    pub cond: JoinCondition,
    pub left: (usize, usize),
    pub right: (usize, usize),
}

/// A query expressed over a concrete set of tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewrittenQuery {
    pub table_refs: Vec<RewrittenRef>,
    pub residual_filters: Vec<ResidualFilter>,
    pub residual_joins: Vec<ResidualJoin>,
    /// Query joins already enforced by the merge conditions of a table.
    pub internal_joins: BTreeSet<JoinCondition>,
    /// `(ref index, column)`.
    pub projections: Vec<(usize, usize)>,
}

impl RewrittenQuery {
    /// Number of table joins the rewrite performs.
    pub fn join_count(&self) -> usize {
        self.table_refs.len().saturating_sub(1)
    }

    pub fn tables(&self) -> BTreeSet<TableId> {
        self.table_refs.iter().map(|r| r.table).collect()
    }

    pub fn to_physical(&self, catalog: &Catalog) -> PhysicalQuery {
        let mut scans: Vec<Scan> = self
            .table_refs
            .iter()
            .map(|r| Scan {
                table: r.table,
                filters: Vec::new(),
                column_eqs: Vec::new(),
            })
            .collect();
        for f in &self.residual_filters {
            scans[f.table_ref]
                .filters
                .push((f.column, catalog.filter_term(&f.value)));
        }
        let mut joins = Vec::new();
        for j in &self.residual_joins {
            if j.left.0 == j.right.0 {
                scans[j.left.0].column_eqs.push((j.left.1, j.right.1));
            } else {
                joins.push((j.left, j.right));
            }
        }
        PhysicalQuery {
            scans,
            joins,
            projections: self.projections.clone(),
        }
    }

    /// SQL-style rendering, for reports.
    pub fn to_sql(&self, catalog: &Catalog) -> String {
        let col = |(r, c): (usize, usize)| -> String {
            let rf = &self.table_refs[r];
            let name = catalog
                .def(rf.table)
                .ok()
                .and_then(|d| d.columns.get(c).cloned())
                .unwrap_or_else(|| format!("c{c}"));
            format!("{}.{}", rf.label, name)
        };
        let quote = |v: &str| format!("'{}'", v.replace('\'', "''"));
        let select: Vec<String> = self.projections.iter().map(|&p| col(p)).collect();
        let from: Vec<String> = self
            .table_refs
            .iter()
            .map(|r| format!("t{} {}", r.table.0, r.label))
            .collect();
        let mut conds: Vec<String> = self
            .residual_filters
            .iter()
            .map(|f| format!("{} = {}", col((f.table_ref, f.column)), quote(&f.value)))
            .collect();
        conds.extend(
            self.residual_joins
                .iter()
                .map(|j| format!("{} = {}", col(j.left), col(j.right))),
        );
        let mut sql = format!("select {} from {}", select.join(", "), from.join(", "));
        if !conds.is_empty() {
            sql.push_str(" where ");
            sql.push_str(&conds.join(" and "));
        }
        sql
    }
}

struct BoundRef {
    table: TableId,
    label: String,
    bindings: Vec<ColumnBinding>,
    base: bool,
}

fn bind_ref(q: &QuerySpec, r: &TableRef, catalog: &Catalog) -> Result<(BoundRef, Vec<JoinCondition>)> {
    let def = catalog.def(r.table)?;
    let mismatch = |msg: String| Error::InvalidRewrite(format!("{}: {msg}", def.name));
    let code_of = |alias: usize| catalog.predicate_code(&q.patterns[alias].predicate);
    let single = || -> Result<usize> {
        match r.aliases.iter().collect::<Vec<_>>().as_slice() {
            [a] => Ok(**a),
            _ => Err(mismatch(format!("serves {} aliases, expected 1", r.aliases.len()))),
        }
    };
    match def.provenance {
        Provenance::Base => {
            let alias = single()?;
            Ok((
                BoundRef {
                    table: r.table,
                    label: q.alias_name(alias).to_owned(),
                    bindings: vec![ColumnBinding { alias, s: 0, o: 2 }],
                    base: true,
                },
                Vec::new(),
            ))
        }
        Provenance::Divided(p) => {
            let alias = single()?;
            if code_of(alias) != Some(p) {
                return Err(mismatch(format!(
                    "does not hold predicate {}",
                    q.patterns[alias].predicate
                )));
            }
            Ok((
                BoundRef {
                    table: r.table,
                    label: q.alias_name(alias).to_owned(),
                    bindings: vec![ColumnBinding { alias, s: 0, o: 1 }],
                    base: false,
                },
                Vec::new(),
            ))
        }
        Provenance::Merged { .. } => {
            if r.aliases.len() != def.constituents.len() {
                return Err(mismatch(format!(
                    "has {} constituents but serves {} aliases",
                    def.constituents.len(),
                    r.aliases.len()
                )));
            }
            let mut slot_alias = Vec::with_capacity(def.constituents.len());
            for &pred in &def.constituents {
                let found: Vec<usize> = r
                    .aliases
                    .iter()
                    .copied()
                    .filter(|&a| code_of(a) == Some(pred))
                    .collect();
                match found.as_slice() {
                    [a] => slot_alias.push(*a),
                    _ => {
                        return Err(mismatch(format!(
                            "constituent {} matches {} aliases",
                            catalog.predicate_name(pred),
                            found.len()
                        )))
                    }
                }
            }
            let to_alias = |pc: PredColumn| {
                let slot = def.constituent_of(pc.pred).expect("constituent");
                AliasColumn::new(slot_alias[slot], pc.pos)
            };
            let mut internal = Vec::new();
            for pj in &def.conds {
                let (a, b) = pj.endpoints();
                let jc = JoinCondition::new(to_alias(a), to_alias(b)).expect("distinct slots");
                if !q.joins.contains(&jc) {
                    return Err(mismatch(format!(
                        "built on {} which the query does not join",
                        q.join_name(&jc)
                    )));
                }
                internal.push(jc);
            }
            let bindings = slot_alias
                .iter()
                .enumerate()
                .map(|(i, &alias)| ColumnBinding {
                    alias,
                    s: ColumnRef::new(i, Pos::S).index(),
                    o: ColumnRef::new(i, Pos::O).index(),
                })
                .collect();
            Ok((
                BoundRef {
                    table: r.table,
                    label: def.name.clone(),
                    bindings,
                    base: false,
                },
                internal,
            ))
        }
    }
}

fn assemble(q: &QuerySpec, mut refs: Vec<BoundRef>, internal: BTreeSet<JoinCondition>) -> RewrittenQuery {
    // Labels must be unique within one statement.
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for r in &mut refs {
        let n = seen.entry(r.label.clone()).or_default();
        if *n > 0 {
            r.label = format!("{}_{}", r.label, n);
        }
        *n += 1;
    }
    let mut locate = BTreeMap::new();
    for (ri, r) in refs.iter().enumerate() {
        for b in &r.bindings {
            locate.insert(b.alias, (ri, *b));
        }
    }
    let at = |c: AliasColumn| {
        let (ri, b) = locate[&c.alias];
        (ri, b.column(c.pos))
    };

    let mut residual_filters = Vec::new();
    for (ri, r) in refs.iter().enumerate() {
        for b in &r.bindings {
            let pattern = &q.patterns[b.alias];
            if r.base {
                residual_filters.push(ResidualFilter {
                    table_ref: ri,
                    column: 1,
                    value: pattern.predicate.clone(),
                });
            }
            for pos in [Pos::S, Pos::O] {
                if let Some(v) = pattern.constant(pos) {
                    residual_filters.push(ResidualFilter {
                        table_ref: ri,
                        column: b.column(pos),
                        value: v.to_owned(),
                    });
                }
            }
        }
    }
    let residual_joins = q
        .joins
        .iter()
        .filter(|j| !internal.contains(j))
        .map(|j| ResidualJoin {
            cond: *j,
            left: at(j.left()),
            right: at(j.right()),
        })
        .collect();
    let projections = q.projections.iter().map(|&c| at(c)).collect();
    RewrittenQuery {
        table_refs: refs
            .into_iter()
            .map(|r| RewrittenRef {
                table: r.table,
                label: r.label,
                bindings: r.bindings,
            })
            .collect(),
        residual_filters,
        residual_joins,
        internal_joins: internal,
        projections,
    }
}

/// The raw query: one filtered scan of `t0` per pattern.
pub fn baseline_rewrite(q: &QuerySpec) -> RewrittenQuery {
    let refs = (0..q.alias_count())
        .map(|alias| BoundRef {
            table: TableId(0),
            label: q.alias_name(alias).to_owned(),
            bindings: vec![ColumnBinding { alias, s: 0, o: 2 }],
            base: true,
        })
        .collect();
    assemble(q, refs, BTreeSet::new())
}

pub fn baseline_plan(q: &QuerySpec, catalog: &Catalog) -> PhysicalQuery {
    baseline_rewrite(q).to_physical(catalog)
}

/// Rewrites `q` onto the tables named by `assignment`.
pub fn apply_rewrite(q: &QuerySpec, assignment: &Assignment, catalog: &Catalog) -> Result<RewrittenQuery> {
    let mut covered = vec![0usize; q.alias_count()];
    for r in &assignment.refs {
        for &a in &r.aliases {
            let slot = covered.get_mut(a).ok_or_else(|| {
                Error::InvalidRewrite(format!("alias index {a} out of range"))
            })?;
            *slot += 1;
        }
    }
    if let Some(a) = covered.iter().position(|&c| c != 1) {
        return Err(Error::InvalidRewrite(format!(
            "alias `{}` covered {} times",
            q.alias_name(a),
            covered[a]
        )));
    }
    let mut refs = Vec::with_capacity(assignment.refs.len());
    let mut internal = BTreeSet::new();
    for r in &assignment.refs {
        let (bound, joins) = bind_ref(q, r, catalog)?;
        refs.push(bound);
        internal.extend(joins);
    }
    Ok(assemble(q, refs, internal))
}

pub fn execute_rewrite(
    catalog: &Catalog,
    rq: &RewrittenQuery,
    mode: MeasureMode,
    repeats: usize,
) -> Result<(ResultSet, Measurement)> {
    execute(catalog, &rq.to_physical(catalog), mode, repeats)
}

/// Bag equality of two result sets.
pub fn results_equal(a: &ResultSet, b: &ResultSet) -> Result<bool> {
    if a.arity != b.arity {
        return Err(Error::ArityMismatch {
            left: a.arity,
            right: b.arity,
        });
    }
    if a.rows.len() != b.rows.len() {
        return Ok(false);
    }
    let mut x = a.rows.clone();
    let mut y = b.rows.clone();
    x.sort_unstable();
    y.sort_unstable();
    Ok(x == y)
}

/// Completes a set of equalities under transitivity.
pub fn closure<I: IntoIterator<Item = JoinCondition>>(conds: I) -> BTreeSet<JoinCondition> {
    let mut parent: BTreeMap<AliasColumn, AliasColumn> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<AliasColumn, AliasColumn>, x: AliasColumn) -> AliasColumn {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let root = find(parent, p);
        parent.insert(x, root);
        root
    }
    for j in conds {
        let (a, b) = (find(&mut parent, j.left()), find(&mut parent, j.right()));
        if a != b {
            parent.insert(a.max(b), a.min(b));
        }
    }
    let cols: Vec<AliasColumn> = parent.keys().copied().collect();
    let mut classes: BTreeMap<AliasColumn, Vec<AliasColumn>> = BTreeMap::new();
    for c in cols {
        let root = find(&mut parent, c);
        classes.entry(root).or_default().push(c);
    }
    let mut out = BTreeSet::new();
    for members in classes.values() {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                out.extend(JoinCondition::new(a, b));
            }
        }
    }
    out
}

/// Predicate-level form of an alias-level join.
pub(crate) fn pred_join(q: &QuerySpec, j: &JoinCondition, catalog: &Catalog) -> Option<PredJoin> {
    let side = |c: AliasColumn| {
        catalog
            .predicate_code(&q.patterns[c.alias].predicate)
            .map(|pred| PredColumn { pred, pos: c.pos })
    };
    Some(PredJoin::new(side(j.left())?, side(j.right())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_workload;
    use crate::storage::Triple;

    fn example_catalog() -> Catalog {
        let t = |s: &str, p: &str, o: &str| Triple::new(s, p, o);
        Catalog::from_triples(&[
            t("u1", "type", "\"senior user\""),
            t("u2", "type", "\"senior user\""),
            t("u3", "type", "junior"),
            t("u1", "comment", "c1"),
            t("u1", "comment", "c2"),
            t("u2", "comment", "c3"),
            t("u3", "comment", "c1"),
            t("c1", "topic", "university"),
            t("c2", "topic", "school"),
            t("c3", "topic", "university"),
        ])
        .unwrap()
    }

    fn example_query() -> QuerySpec {
        parse_workload(
            "QUERY ex1\nPATTERN a p=type o=\"senior user\"\nPATTERN b p=comment\n\
             PATTERN c p=topic o=university\nJOIN a.s=b.s\nJOIN b.o=c.s\nSELECT a.s\nEND\n",
            "w",
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn identity_rewrite_matches_baseline() {
        let c = example_catalog();
        let q = example_query();
        let rq = apply_rewrite(&q, &Assignment::baseline(&q), &c).unwrap();
        assert_eq!(rq, baseline_rewrite(&q));
        let plan = baseline_plan(&q, &c);
        assert_eq!(plan.scans.len(), 3);
        assert_eq!(plan.joins.len(), 2);
    }

    #[test]
    fn example_one_rewrite_on_merged_and_divided() {
        let mut c = example_catalog();
        let t1 = c.divide_by_name("type").unwrap();
        let t2 = c.divide_by_name("comment").unwrap();
        let t3 = c.divide_by_name("topic").unwrap();
        let ss = PredJoin::new(
            PredColumn { pred: 1, pos: Pos::S },
            PredColumn { pred: 2, pos: Pos::S },
        );
        let t4 = c.merge_on(t1, t2, ss).unwrap();
        let q = example_query();
        let a = Assignment::from_map(&q, &[t4, t4, t3], &c).unwrap();
        assert_eq!(a.refs.len(), 2);
        let rq = apply_rewrite(&q, &a, &c).unwrap();
        let sql = rq.to_sql(&c);
        assert_eq!(
            sql,
            "select t4.s from t4 t4, t3 c where t4.o = '\"senior user\"' and c.o = 'university' and t4.bo = c.s"
        );
        assert_eq!(rq.residual_joins.len(), 1);
        assert_eq!(rq.join_count(), 1);

        let (base, _) = execute_rewrite(&c, &baseline_rewrite(&q), MeasureMode::CostModel, 1).unwrap();
        let (got, _) = execute_rewrite(&c, &rq, MeasureMode::CostModel, 1).unwrap();
        assert!(results_equal(&base, &got).unwrap());
        // u1 via c1, u2 via c3
        assert_eq!(base.len(), 2);
    }

    #[test]
    fn coverage_and_consistency_errors() {
        let mut c = example_catalog();
        let t1 = c.divide_by_name("type").unwrap();
        let t2 = c.divide_by_name("comment").unwrap();
        let q = example_query();
        // double cover
        let a = Assignment {
            refs: vec![
                TableRef { table: t1, aliases: BTreeSet::from([0]) },
                TableRef { table: c.base(), aliases: BTreeSet::from([0]) },
                TableRef { table: t2, aliases: BTreeSet::from([1]) },
            ],
        };
        assert!(matches!(apply_rewrite(&q, &a, &c), Err(Error::InvalidRewrite(_))));
        // wrong predicate
        let a = Assignment::from_map(&q, &[t2, t1, c.base()], &c).unwrap();
        assert!(matches!(apply_rewrite(&q, &a, &c), Err(Error::InvalidRewrite(_))));
        // merged table built on a join the query does not have
        let oo = PredJoin::new(
            PredColumn { pred: 1, pos: Pos::O },
            PredColumn { pred: 2, pos: Pos::O },
        );
        let m = c.merge_on(t1, t2, oo).unwrap();
        let a = Assignment::from_map(&q, &[m, m, c.base()], &c).unwrap();
        assert!(matches!(apply_rewrite(&q, &a, &c), Err(Error::InvalidRewrite(_))));
    }

    #[test]
    fn results_equal_is_bag_equality() {
        let rs = |rows: Vec<Vec<u32>>, arity| ResultSet { arity, rows };
        assert!(results_equal(&rs(vec![vec![1, 2]], 2), &rs(vec![vec![1, 2]], 2)).unwrap());
        assert!(!results_equal(&rs(vec![vec![1], vec![1]], 1), &rs(vec![vec![1]], 1)).unwrap());
        assert!(results_equal(
            &rs(vec![vec![1], vec![2], vec![1]], 1),
            &rs(vec![vec![2], vec![1], vec![1]], 1)
        )
        .unwrap());
        assert!(matches!(
            results_equal(&rs(vec![], 1), &rs(vec![], 2)),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn closure_adds_transitive_pairs() {
        let a = |i, p| AliasColumn::new(i, p);
        let j = |x, y| JoinCondition::new(x, y).unwrap();
        let closed = closure([j(a(0, Pos::S), a(1, Pos::S)), j(a(1, Pos::S), a(2, Pos::S))]);
        assert!(closed.contains(&j(a(0, Pos::S), a(2, Pos::S))));
        assert_eq!(closed.len(), 3);
        let closed = closure([j(a(0, Pos::S), a(1, Pos::S)), j(a(1, Pos::O), a(2, Pos::S))]);
        assert_eq!(closed.len(), 2);
    }
}
