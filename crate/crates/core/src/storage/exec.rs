//! Conjunctive query execution with hash joins.
//!
//! Besides wall-clock timing, every run reports a deterministic cost: each
//! scan adds rows scanned plus rows emitted, and each join adds build rows,
//! probe rows and rows emitted.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::catalog::{Catalog, TableId, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureMode {
    WallClock,
    #[default]
    CostModel,
}

/// One table reference with its local predicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scan {
    pub table: TableId,
    /// `(column, value)` equality filters.
    pub filters: Vec<(usize, TermId)>,
    /// Column equalities within one row.
    pub column_eqs: Vec<(usize, usize)>,
}

/// `(scan index, column index)`.
pub type Slot = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalQuery {
    pub scans: Vec<Scan>,
    /// Equi-join predicates between two different scans.
    pub joins: Vec<(Slot, Slot)>,
    pub projections: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub arity: usize,
    pub rows: Vec<Vec<TermId>>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Mean seconds per run (wall-clock mode; zero in cost-model mode).
    pub wall_time: f64,
    pub cost: u64,
    pub rows_out: usize,
}

impl Measurement {
    /// The quantity rewards and priority lists are ranked by.
    pub fn value(&self, mode: MeasureMode) -> f64 {
        match mode {
            MeasureMode::WallClock => self.wall_time,
            MeasureMode::CostModel => self.cost as f64,
        }
    }
}

/// Intermediate relation: row-major values for a list of slots.
struct Relation {
    slots: Vec<Slot>,
    data: Vec<TermId>,
}

impl Relation {
    fn width(&self) -> usize {
        self.slots.len()
    }

    fn len(&self) -> usize {
        if self.slots.is_empty() {
            0
        } else {
            self.data.len() / self.slots.len()
        }
    }

    fn row(&self, r: usize) -> &[TermId] {
        let w = self.width();
        &self.data[r * w..(r + 1) * w]
    }

    fn position(&self, slot: Slot) -> Option<usize> {
        self.slots.iter().position(|&s| s == slot)
    }
}

fn validate(catalog: &Catalog, plan: &PhysicalQuery) -> Result<()> {
    if plan.scans.is_empty() {
        return Err(Error::InvalidPlan("plan has no scans".to_owned()));
    }
    for scan in &plan.scans {
        let width = catalog.table(scan.table)?.width();
        let bad = scan
            .filters
            .iter()
            .map(|f| f.0)
            .chain(scan.column_eqs.iter().flat_map(|&(a, b)| [a, b]))
            .find(|&c| c >= width);
        if let Some(c) = bad {
            return Err(Error::InvalidPlan(format!(
                "unknown column {c} of {}",
                scan.table
            )));
        }
    }
    let check_slot = |(s, c): Slot| -> Result<()> {
        let scan = plan
            .scans
            .get(s)
            .ok_or_else(|| Error::InvalidPlan(format!("unknown scan {s}")))?;
        if c >= catalog.table(scan.table)?.width() {
            return Err(Error::InvalidPlan(format!(
                "unknown column {c} of {}",
                scan.table
            )));
        }
        Ok(())
    };
    for &(a, b) in &plan.joins {
        check_slot(a)?;
        check_slot(b)?;
        if a.0 == b.0 {
            return Err(Error::InvalidPlan(
                "join between columns of the same scan; use column_eqs".to_owned(),
            ));
        }
    }
    plan.projections.iter().try_for_each(|&s| check_slot(s))
}

fn run_scan(catalog: &Catalog, plan: &PhysicalQuery, idx: usize, cost: &mut u64) -> Relation {
    let scan = &plan.scans[idx];
    let table = catalog.table(scan.table).expect("validated");
    let mut needed: Vec<usize> = plan
        .joins
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .chain(plan.projections.iter().copied())
        .filter(|s| s.0 == idx)
        .map(|s| s.1)
        .collect();
    needed.sort_unstable();
    needed.dedup();

    let n = table.row_count();
    let mut data = Vec::new();
    let mut emitted = 0u64;
    'rows: for r in 0..n {
        for &(c, v) in &scan.filters {
            if table.column_data(c)[r] != v {
                continue 'rows;
            }
        }
        for &(a, b) in &scan.column_eqs {
            if table.column_data(a)[r] != table.column_data(b)[r] {
                continue 'rows;
            }
        }
        data.extend(needed.iter().map(|&c| table.column_data(c)[r]));
        emitted += 1;
    }
    *cost += n as u64 + emitted;
    let mut rel = Relation {
        slots: needed.into_iter().map(|c| (idx, c)).collect(),
        data,
    };
    // A scan with no needed columns still contributes its multiplicity.
    if rel.slots.is_empty() {
        rel.slots.push((idx, usize::MAX));
        rel.data = vec![0; emitted as usize];
    }
    rel
}

fn hash_join(left: Relation, right: Relation, keys: &[(usize, usize)], cost: &mut u64) -> Relation {
    let (lw, rw) = (left.width(), right.width());
    let (ln, rn) = (left.len(), right.len());
    let build_left = ln <= rn;
    let mut table: HashMap<Vec<TermId>, Vec<usize>> = HashMap::new();
    let (build, build_keys): (&Relation, Vec<usize>) = if build_left {
        (&left, keys.iter().map(|k| k.0).collect())
    } else {
        (&right, keys.iter().map(|k| k.1).collect())
    };
    for r in 0..build.len() {
        let row = build.row(r);
        table
            .entry(build_keys.iter().map(|&c| row[c]).collect())
            .or_default()
            .push(r);
    }
    let (probe, probe_keys): (&Relation, Vec<usize>) = if build_left {
        (&right, keys.iter().map(|k| k.1).collect())
    } else {
        (&left, keys.iter().map(|k| k.0).collect())
    };
    let mut data = Vec::new();
    let mut emitted = 0u64;
    let mut key = Vec::with_capacity(keys.len());
    for p in 0..probe.len() {
        let prow = probe.row(p);
        key.clear();
        key.extend(probe_keys.iter().map(|&c| prow[c]));
        let Some(matches) = table.get(&key) else { continue };
        for &b in matches {
            let brow = build.row(b);
            let (lrow, rrow) = if build_left { (brow, prow) } else { (prow, brow) };
            data.extend_from_slice(lrow);
            data.extend_from_slice(rrow);
            emitted += 1;
        }
    }
    *cost += build.len() as u64 + probe.len() as u64 + emitted;
    let mut slots = left.slots;
    slots.extend(right.slots);
    debug_assert_eq!(slots.len(), lw + rw);
    Relation { slots, data }
}

fn run_once(catalog: &Catalog, plan: &PhysicalQuery) -> (ResultSet, u64) {
    let mut cost = 0u64;
    let mut current = run_scan(catalog, plan, 0, &mut cost);
    let mut joined = vec![0usize];
    let mut remaining: Vec<usize> = (1..plan.scans.len()).collect();
    while !remaining.is_empty() {
        let connects = |k: usize| {
            plan.joins.iter().any(|&(a, b)| {
                (a.0 == k && joined.contains(&b.0)) || (b.0 == k && joined.contains(&a.0))
            })
        };
        let pick = remaining
            .iter()
            .position(|&k| connects(k))
            .unwrap_or(0);
        let next = remaining.remove(pick);
        let right = run_scan(catalog, plan, next, &mut cost);
        let keys: Vec<(usize, usize)> = plan
            .joins
            .iter()
            .filter_map(|&(a, b)| {
                let (mine, other) = if a.0 == next {
                    (a, b)
                } else if b.0 == next {
                    (b, a)
                } else {
                    return None;
                };
                joined.contains(&other.0).then(|| {
                    (
                        current.position(other).expect("join column retained"),
                        right.position(mine).expect("join column retained"),
                    )
                })
            })
            .collect();
        current = hash_join(current, right, &keys, &mut cost);
        joined.push(next);
    }
    let positions: Vec<usize> = plan
        .projections
        .iter()
        .map(|&s| current.position(s).expect("projection column retained"))
        .collect();
    let rows = (0..current.len())
        .map(|r| {
            let row = current.row(r);
            positions.iter().map(|&p| row[p]).collect()
        })
        .collect();
    (
        ResultSet {
            arity: plan.projections.len(),
            rows,
        },
        cost,
    )
}

/// Runs `plan`. In wall-clock mode the reported time is the mean over
/// `repeats` runs; cost-model mode evaluates once.
pub fn execute(
    catalog: &Catalog,
    plan: &PhysicalQuery,
    mode: MeasureMode,
    repeats: usize,
) -> Result<(ResultSet, Measurement)> {
    validate(catalog, plan)?;
    let runs = match mode {
        MeasureMode::CostModel => 1,
        MeasureMode::WallClock => repeats.max(1),
    };
    let mut total = 0.0;
    let mut last = None;
    for _ in 0..runs {
        let start = Instant::now();
        let out = run_once(catalog, plan);
        total += start.elapsed().as_secs_f64();
        last = Some(out);
    }
    let (rs, cost) = last.expect("at least one run");
    let wall_time = match mode {
        MeasureMode::WallClock => total / runs as f64,
        MeasureMode::CostModel => 0.0,
    };
    let m = Measurement {
        wall_time,
        cost,
        rows_out: rs.len(),
    };
    Ok((rs, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::ntriples::Triple;

    fn catalog() -> Catalog {
        Catalog::from_triples(&[
            Triple::new("s1", "type", "A"),
            Triple::new("s1", "likes", "B"),
            Triple::new("s2", "type", "C"),
            Triple::new("s2", "likes", "B"),
        ])
        .unwrap()
    }

    #[test]
    fn filtered_scan_cost() {
        let c = catalog();
        let plan = PhysicalQuery {
            scans: vec![Scan {
                table: c.base(),
                filters: vec![(1, c.filter_term("type"))],
                column_eqs: vec![],
            }],
            joins: vec![],
            projections: vec![(0, 0)],
        };
        let (rs, m) = execute(&c, &plan, MeasureMode::CostModel, 3).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(m.cost, 4 + 2);
        assert_eq!(m.wall_time, 0.0);
        let (_, again) = execute(&c, &plan, MeasureMode::CostModel, 3).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn self_join_over_base() {
        let c = catalog();
        let scan = |p: &str| Scan {
            table: c.base(),
            filters: vec![(1, c.filter_term(p))],
            column_eqs: vec![],
        };
        let plan = PhysicalQuery {
            scans: vec![scan("type"), scan("likes")],
            joins: vec![((0, 0), (1, 0))],
            projections: vec![(0, 2), (1, 2)],
        };
        let (rs, m) = execute(&c, &plan, MeasureMode::CostModel, 1).unwrap();
        let id = |x| c.lookup_term(x).unwrap();
        let mut rows = rs.rows.clone();
        rows.sort();
        let mut expected = vec![vec![id("A"), id("B")], vec![id("C"), id("B")]];
        expected.sort();
        assert_eq!(rows, expected);
        // scans 4+2 each, join build 2 + probe 2 + out 2
        assert_eq!(m.cost, 6 + 6 + 6);
    }

    #[test]
    fn absent_constant_matches_nothing() {
        let c = catalog();
        let plan = PhysicalQuery {
            scans: vec![Scan {
                table: c.base(),
                filters: vec![(2, c.filter_term("nowhere"))],
                column_eqs: vec![],
            }],
            joins: vec![],
            projections: vec![(0, 0)],
        };
        assert!(execute(&c, &plan, MeasureMode::CostModel, 1)
            .unwrap()
            .0
            .is_empty());
    }

    #[test]
    fn unknown_column_is_rejected() {
        let c = catalog();
        let plan = PhysicalQuery {
            scans: vec![Scan {
                table: c.base(),
                filters: vec![],
                column_eqs: vec![],
            }],
            joins: vec![],
            projections: vec![(0, 7)],
        };
        assert!(matches!(
            execute(&c, &plan, MeasureMode::CostModel, 1),
            Err(Error::InvalidPlan(_))
        ));
        let plan = PhysicalQuery {
            scans: vec![Scan {
                table: TableId(5),
                filters: vec![],
                column_eqs: vec![],
            }],
            joins: vec![],
            projections: vec![],
        };
        assert!(matches!(
            execute(&c, &plan, MeasureMode::CostModel, 1),
            Err(Error::UnknownTable(5))
        ));
    }

    #[test]
    fn wall_clock_reports_time() {
        let c = catalog();
        let plan = PhysicalQuery {
            scans: vec![Scan {
                table: c.base(),
                filters: vec![],
                column_eqs: vec![(0, 0)],
            }],
            joins: vec![],
            projections: vec![(0, 1)],
        };
        let (rs, m) = execute(&c, &plan, MeasureMode::WallClock, 3).unwrap();
        assert_eq!(rs.len(), 4);
        assert!(m.wall_time >= 0.0);
        assert!(m.cost > 0);
    }
}
