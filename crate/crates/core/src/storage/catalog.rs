//! Tables, their provenance, and the divide / merge operations.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::ntriples::{parse_ntriples, Triple};

/// Interned term.
pub type TermId = u32;

/// Predicate code in `1..=n`.
pub type PredCode = u32;

/// Filter value for a constant that does not occur in the dataset; no row
/// ever carries it.
pub const ABSENT_TERM: TermId = TermId::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TableId(pub usize);

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Subject or object position of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    S,
    O,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::S => "s",
            Pos::O => "o",
        }
    }

    pub fn parse(token: &str) -> Option<Pos> {
        match token {
            "s" => Some(Pos::S),
            "o" => Some(Pos::O),
            _ => None,
        }
    }
}

/// One side of a predicate-level join: the `s` or `o` column of the
/// constituent holding `pred`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredColumn {
    pub pred: PredCode,
    pub pos: Pos,
}

/// Unordered equality between two predicate columns, stored with the
/// smaller endpoint first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredJoin {
    first: PredColumn,
    second: PredColumn,
}

impl PredJoin {
    pub fn new(a: PredColumn, b: PredColumn) -> Self {
        if a <= b {
            PredJoin { first: a, second: b }
        } else {
            PredJoin { first: b, second: a }
        }
    }

    pub fn endpoints(&self) -> (PredColumn, PredColumn) {
        (self.first, self.second)
    }
}

/// Column of a non-base table addressed by constituent index and position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub constituent: usize,
    pub pos: Pos,
}

impl ColumnRef {
    pub fn new(constituent: usize, pos: Pos) -> Self {
        ColumnRef { constituent, pos }
    }

    /// Physical column index in a divided or merged table.
    pub fn index(self) -> usize {
        2 * self.constituent + usize::from(self.pos == Pos::O)
    }
}

/// Equality between a column of the left input and a column of the right
/// input of a merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeCondition {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Base,
    Divided(PredCode),
    Merged {
        left: TableId,
        right: TableId,
        cond: PredJoin,
    },
}

/// Content identity of a table. Two merges that produce the same predicate
/// set under the same join conditions hold the same rows up to column order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableKey {
    Base,
    Divided(PredCode),
    Merged {
        preds: BTreeSet<PredCode>,
        conds: BTreeSet<PredJoin>,
    },
}

impl TableKey {
    pub fn constituent_count(&self) -> usize {
        match self {
            TableKey::Base => 0,
            TableKey::Divided(_) => 1,
            TableKey::Merged { preds, .. } => preds.len(),
        }
    }

    pub fn preds(&self) -> BTreeSet<PredCode> {
        match self {
            TableKey::Base => BTreeSet::new(),
            TableKey::Divided(p) => BTreeSet::from([*p]),
            TableKey::Merged { preds, .. } => preds.clone(),
        }
    }

    pub fn conds(&self) -> BTreeSet<PredJoin> {
        match self {
            TableKey::Merged { conds, .. } => conds.clone(),
            _ => BTreeSet::new(),
        }
    }

    /// Key of the table produced by merging `left` and `right` under `cond`.
    pub fn merged(left: &TableKey, right: &TableKey, cond: PredJoin) -> TableKey {
        let mut preds = left.preds();
        preds.extend(right.preds());
        let mut conds = left.conds();
        conds.extend(right.conds());
        conds.insert(cond);
        TableKey::Merged { preds, conds }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub id: TableId,
    pub name: String,
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub constituents: Vec<PredCode>,
    pub conds: BTreeSet<PredJoin>,
}

impl TableDef {
    pub fn is_base(&self) -> bool {
        matches!(self.provenance, Provenance::Base)
    }

    pub fn key(&self) -> TableKey {
        match self.provenance {
            Provenance::Base => TableKey::Base,
            Provenance::Divided(p) => TableKey::Divided(p),
            Provenance::Merged { .. } => TableKey::Merged {
                preds: self.constituents.iter().copied().collect(),
                conds: self.conds.clone(),
            },
        }
    }

    /// Constituent slot holding `pred`, if any.
    pub fn constituent_of(&self, pred: PredCode) -> Option<usize> {
        self.constituents.iter().position(|&p| p == pred)
    }

    pub fn column(&self, col: ColumnRef) -> Option<usize> {
        (col.constituent < self.constituents.len()).then(|| col.index())
    }
}

/// Column name prefix of the `i`-th constituent: `""`, `"b"`, `"c"`, ...
pub fn constituent_prefix(i: usize) -> String {
    match i {
        0 => String::new(),
        1..=25 => char::from(b'a' + i as u8).to_string(),
        _ => format!("x{i}"),
    }
}

fn merged_columns(k: usize) -> Vec<String> {
    (0..k)
        .flat_map(|i| {
            let prefix = constituent_prefix(i);
            [format!("{prefix}s"), format!("{prefix}o")]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Table {
    pub def: TableDef,
    /// Column-major storage.
    columns: Vec<Vec<TermId>>,
}

impl Table {
    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column_data(&self, col: usize) -> &[TermId] {
        &self.columns[col]
    }

    pub fn row(&self, r: usize) -> Vec<TermId> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<TermId>> + '_ {
        (0..self.row_count()).map(|r| self.row(r))
    }
}

#[derive(Debug, Clone, Default)]
struct Interner {
    strings: Vec<String>,
    ids: HashMap<String, TermId>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> TermId {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as TermId;
        self.strings.push(s.to_owned());
        self.ids.insert(s.to_owned(), id);
        id
    }
}

/// The relational state: `t0` plus every divided and merged table, in
/// creation order.
#[derive(Debug, Clone)]
pub struct Catalog {
    terms: Interner,
    /// `predicates[code - 1]` is the term of predicate `code`.
    predicates: Vec<TermId>,
    pred_codes: HashMap<TermId, PredCode>,
    tables: Vec<Table>,
    by_key: HashMap<TableKey, TableId>,
}

impl Catalog {
    /// Builds a catalog holding only `t0`. Predicate codes follow first
    /// appearance.
    pub fn from_triples(triples: &[Triple]) -> Result<Catalog> {
        if triples.is_empty() {
            return Err(Error::EmptyInput("dataset".to_owned()));
        }
        let mut terms = Interner::default();
        let mut predicates = Vec::new();
        let mut pred_codes = HashMap::new();
        let mut cols: Vec<Vec<TermId>> = (0..3).map(|_| Vec::with_capacity(triples.len())).collect();
        for t in triples {
            if t.s.is_empty() || t.p.is_empty() || t.o.is_empty() {
                return Err(Error::InvalidPlan(format!(
                    "triple with empty term: {t:?}"
                )));
            }
            let s = terms.intern(&t.s);
            let p = terms.intern(&t.p);
            let o = terms.intern(&t.o);
            pred_codes.entry(p).or_insert_with(|| {
                predicates.push(p);
                predicates.len() as PredCode
            });
            cols[0].push(s);
            cols[1].push(p);
            cols[2].push(o);
        }
        let base = Table {
            def: TableDef {
                id: TableId(0),
                name: "t0".to_owned(),
                provenance: Provenance::Base,
                columns: vec!["s".into(), "p".into(), "o".into()],
                constituents: Vec::new(),
                conds: BTreeSet::new(),
            },
            columns: cols,
        };
        Ok(Catalog {
            terms,
            predicates,
            pred_codes,
            tables: vec![base],
            by_key: HashMap::from([(TableKey::Base, TableId(0))]),
        })
    }

    pub fn from_ntriples_str(text: &str, source_name: &str) -> Result<Catalog> {
        Catalog::from_triples(&parse_ntriples(text, source_name)?)
    }

    /// Loads an N-Triples file into a fresh catalog.
    pub fn load_ntriples(path: impl AsRef<Path>) -> Result<Catalog> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Catalog::from_ntriples_str(&text, &path.display().to_string())
    }

    pub fn base(&self) -> TableId {
        TableId(0)
    }

    pub fn triple_count(&self) -> usize {
        self.tables[0].row_count()
    }

    pub fn predicate_count(&self) -> usize {
        self.predicates.len()
    }

    pub fn predicate_code(&self, predicate: &str) -> Option<PredCode> {
        let id = *self.terms.ids.get(predicate)?;
        self.pred_codes.get(&id).copied()
    }

    pub fn predicate_name(&self, code: PredCode) -> &str {
        self.term(self.predicates[code as usize - 1])
    }

    pub fn predicate_term(&self, code: PredCode) -> TermId {
        self.predicates[code as usize - 1]
    }

    /// Predicate dictionary in code order.
    pub fn predicate_dict(&self) -> Vec<(String, PredCode)> {
        self.predicates
            .iter()
            .enumerate()
            .map(|(i, &t)| (self.term(t).to_owned(), i as PredCode + 1))
            .collect()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms.strings[id as usize]
    }

    pub fn lookup_term(&self, term: &str) -> Option<TermId> {
        self.terms.ids.get(term).copied()
    }

    /// Term id for a filter constant; constants absent from the data map to
    /// [`ABSENT_TERM`].
    pub fn filter_term(&self, term: &str) -> TermId {
        self.lookup_term(term).unwrap_or(ABSENT_TERM)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.iter()
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, id: TableId) -> Result<&Table> {
        self.tables.get(id.0).ok_or(Error::UnknownTable(id.0))
    }

    pub fn def(&self, id: TableId) -> Result<&TableDef> {
        self.table(id).map(|t| &t.def)
    }

    pub fn find(&self, key: &TableKey) -> Option<TableId> {
        self.by_key.get(key).copied()
    }

    /// Total rows over all tables, `t0` included.
    pub fn total_rows(&self) -> usize {
        self.tables.iter().map(Table::row_count).sum()
    }

    /// Drops every table except `t0`.
    pub fn reset(&mut self) {
        self.tables.truncate(1);
        self.by_key.retain(|k, _| *k == TableKey::Base);
    }

    fn push(&mut self, mut def: TableDef, columns: Vec<Vec<TermId>>) -> TableId {
        let id = TableId(self.tables.len());
        def.id = id;
        def.name = format!("t{}", id.0);
        self.by_key.insert(def.key(), id);
        self.tables.push(Table { def, columns });
        id
    }

    /// Copies every `(s, o)` with predicate `pred` out of `t0` into a new table.
    pub fn divide(&mut self, pred: PredCode) -> Result<TableId> {
        if pred == 0 || pred as usize > self.predicates.len() {
            return Err(Error::UnknownPredicate(format!("#{pred}")));
        }
        if self.find(&TableKey::Divided(pred)).is_some() {
            return Err(Error::DuplicateDivide(self.predicate_name(pred).to_owned()));
        }
        let p_term = self.predicate_term(pred);
        let base = &self.tables[0];
        let (s_col, p_col, o_col) = (&base.columns[0], &base.columns[1], &base.columns[2]);
        let mut s = Vec::new();
        let mut o = Vec::new();
        for r in 0..p_col.len() {
            if p_col[r] == p_term {
                s.push(s_col[r]);
                o.push(o_col[r]);
            }
        }
        let def = TableDef {
            id: TableId(0),
            name: String::new(),
            provenance: Provenance::Divided(pred),
            columns: vec!["s".into(), "o".into()],
            constituents: vec![pred],
            conds: BTreeSet::new(),
        };
        Ok(self.push(def, vec![s, o]))
    }

    /// Divides by predicate name.
    pub fn divide_by_name(&mut self, predicate: &str) -> Result<TableId> {
        let code = self
            .predicate_code(predicate)
            .ok_or_else(|| Error::UnknownPredicate(predicate.to_owned()))?;
        self.divide(code)
    }

    /// Predicate-level form of a merge condition between `ti` and `tj`.
    pub fn pred_join(&self, ti: TableId, tj: TableId, cond: MergeCondition) -> Result<PredJoin> {
        let (li, lj) = (self.def(ti)?, self.def(tj)?);
        let side = |def: &TableDef, col: ColumnRef| -> Result<PredColumn> {
            def.constituents
                .get(col.constituent)
                .map(|&pred| PredColumn { pred, pos: col.pos })
                .ok_or_else(|| {
                    Error::InvalidMerge(format!(
                        "{} has no constituent {}",
                        def.name, col.constituent
                    ))
                })
        };
        Ok(PredJoin::new(side(li, cond.left)?, side(lj, cond.right)?))
    }

    /// Materializes the equi-join of `ti` and `tj` on `cond` as a new table.
    pub fn merge(&mut self, ti: TableId, tj: TableId, cond: MergeCondition) -> Result<TableId> {
        let (left, right) = (self.table(ti)?, self.table(tj)?);
        if left.def.is_base() || right.def.is_base() {
            return Err(Error::InvalidMerge("t0 cannot be merged".to_owned()));
        }
        if ti == tj {
            return Err(Error::InvalidMerge(format!("{ti} merged with itself")));
        }
        let lp: BTreeSet<_> = left.def.constituents.iter().collect();
        if right.def.constituents.iter().any(|p| lp.contains(p)) {
            return Err(Error::InvalidMerge(format!(
                "{} and {} share a constituent predicate",
                left.def.name, right.def.name
            )));
        }
        let pj = self.pred_join(ti, tj, cond)?;
        let key = TableKey::merged(&left.def.key(), &right.def.key(), pj);
        if self.find(&key).is_some() {
            return Err(Error::DuplicateTable(format!("{key:?}")));
        }

        let (lc, rc) = (cond.left.index(), cond.right.index());
        let lkeys = left.column_data(lc);
        let rkeys = right.column_data(rc);
        let mut index: HashMap<TermId, Vec<usize>> = HashMap::new();
        for (r, &k) in rkeys.iter().enumerate() {
            index.entry(k).or_default().push(r);
        }
        let width = left.width() + right.width();
        let mut out: Vec<Vec<TermId>> = vec![Vec::new(); width];
        for (l, k) in lkeys.iter().enumerate() {
            let Some(matches) = index.get(k) else { continue };
            for &r in matches {
                let (lo, ro) = out.split_at_mut(left.width());
                for (dst, src) in lo.iter_mut().zip(&left.columns) {
                    dst.push(src[l]);
                }
                for (dst, src) in ro.iter_mut().zip(&right.columns) {
                    dst.push(src[r]);
                }
            }
        }

        let mut constituents = left.def.constituents.clone();
        constituents.extend(&right.def.constituents);
        let mut conds = left.def.conds.clone();
        conds.extend(right.def.conds.iter().copied());
        conds.insert(pj);
        let def = TableDef {
            id: TableId(0),
            name: String::new(),
            provenance: Provenance::Merged {
                left: ti,
                right: tj,
                cond: pj,
            },
            columns: merged_columns(constituents.len()),
            constituents,
            conds,
        };
        Ok(self.push(def, out))
    }

    /// Merge addressed by predicate-level columns instead of constituent slots.
    pub fn merge_on(&mut self, ti: TableId, tj: TableId, join: PredJoin) -> Result<TableId> {
        let (a, b) = join.endpoints();
        let (li, lj) = (self.def(ti)?, self.def(tj)?);
        let locate = |def: &TableDef, pc: PredColumn| {
            def.constituent_of(pc.pred).map(|c| ColumnRef::new(c, pc.pos))
        };
        let cond = match (locate(li, a), locate(lj, b), locate(li, b), locate(lj, a)) {
            (Some(l), Some(r), _, _) => MergeCondition { left: l, right: r },
            (_, _, Some(l), Some(r)) => MergeCondition { left: l, right: r },
            _ => {
                return Err(Error::InvalidMerge(format!(
                    "condition {join:?} does not connect {ti} and {tj}"
                )))
            }
        };
        self.merge(ti, tj, cond)
    }
}
