use std::collections::BTreeMap;
use std::fmt::Write as _;

use proptest::prelude::*;

use triplayout_core::agent::{masked_argmax, ReplayBuffer};
use triplayout_core::env::{encode_state, Transition};
use triplayout_core::query::{
    apply_rewrite, baseline_plan, closure, execute_rewrite, parse_workload, print_workload,
    results_equal, AliasColumn, JoinCondition, QuerySpec,
};
use triplayout_core::rewriter::{build_priority_list, enumerate_priority_items, generate_table_sequence};
use triplayout_core::storage::{
    constituent_prefix, execute, Catalog, MeasureMode, Pos, PredColumn, PredJoin, TableKey, Triple,
};

fn triples(preds: u32, terms: u32, max: usize) -> impl Strategy<Value = Vec<Triple>> {
    prop::collection::vec((0..terms, 1..=preds, 0..terms), 1..max).prop_map(move |raw| {
        let mut out: Vec<Triple> = (1..=preds)
            .map(|p| Triple::new("e0", format!("p{p}"), "e1"))
            .collect();
        out.extend(raw.into_iter().map(|(s, p, o)| Triple::new(format!("e{s}"), format!("p{p}"), format!("e{o}"))));
        out
    })
}

fn position() -> impl Strategy<Value = Pos> {
    prop_oneof![Just(Pos::S), Just(Pos::O)]
}

/// A connected query over `p1..=p3`: pattern i > 0 joins an earlier one.
fn query_text() -> impl Strategy<Value = String> {
    (1usize..=4)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((1u32..=3, prop::option::weighted(0.2, 0u32..12)), n),
                prop::collection::vec((any::<prop::sample::Index>(), position(), position()), n - 1),
            )
        })
        .prop_map(|(patterns, joins)| {
            let name = |p: Pos| if p == Pos::S { "s" } else { "o" };
            let mut t = String::from("QUERY q\n");
            for (a, (p, o)) in patterns.iter().enumerate() {
                let _ = write!(t, "PATTERN a{a} p=p{p}");
                if let Some(o) = o {
                    let _ = write!(t, " o=e{o}");
                }
                t.push('\n');
            }
            for (i, (parent, x, y)) in joins.iter().enumerate() {
                let a = i + 1;
                let _ = writeln!(t, "JOIN a{}.{}=a{a}.{}", parent.index(a), name(*x), name(*y));
            }
            let _ = writeln!(t, "SELECT a0.s, a{}.o\nEND", patterns.len() - 1);
            t
        })
}

fn parse(text: &str) -> QuerySpec {
    parse_workload(text, "prop").unwrap().remove(0)
}

fn sorted_rows(c: &Catalog, key: &TableKey) -> Vec<Vec<u32>> {
    let mut rows: Vec<Vec<u32>> = c.table(c.find(key).unwrap()).unwrap().rows().collect();
    rows.sort();
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_match_filters_and_base_is_untouched(data in triples(3, 10, 200)) {
        let mut c = Catalog::from_triples(&data).unwrap();
        let base: Vec<Vec<u32>> = c.table(c.base()).unwrap().rows().collect();
        for p in 1..=3u32 {
            let code = c.predicate_code(&format!("p{p}")).unwrap();
            c.divide(code).unwrap();
            let mut expected: Vec<Vec<u32>> = data
                .iter()
                .filter(|t| t.p == format!("p{p}"))
                .map(|t| vec![c.lookup_term(&t.s).unwrap(), c.lookup_term(&t.o).unwrap()])
                .collect();
            expected.sort();
            prop_assert_eq!(sorted_rows(&c, &TableKey::Divided(code)), expected);
        }
        let after: Vec<Vec<u32>> = c.table(c.base()).unwrap().rows().collect();
        prop_assert_eq!(base, after);
    }

    #[test]
    fn merges_match_nested_loops(data in triples(3, 8, 120), x in position(), y in position(), z in position()) {
        let mut c = Catalog::from_triples(&data).unwrap();
        let t1 = c.divide(1).unwrap();
        let t2 = c.divide(2).unwrap();
        let t3 = c.divide(3).unwrap();
        let col = |p: Pos| usize::from(p == Pos::O);
        let rows = |c: &Catalog, t| -> Vec<Vec<u32>> { c.table(t).unwrap().rows().collect() };
        let nested = |l: &[Vec<u32>], lc: usize, r: &[Vec<u32>], rc: usize| {
            let mut out: Vec<Vec<u32>> = l
                .iter()
                .flat_map(|a| r.iter().filter(move |b| a[lc] == b[rc]).map(move |b| [a.clone(), b.clone()].concat()))
                .collect();
            out.sort();
            out
        };
        let j12 = PredJoin::new(PredColumn { pred: 1, pos: x }, PredColumn { pred: 2, pos: y });
        let m = c.merge_on(t1, t2, j12).unwrap();
        let mut got = rows(&c, m);
        got.sort();
        let two = nested(&rows(&c, t1), col(x), &rows(&c, t2), col(y));
        prop_assert_eq!(&got, &two);

        let j23 = PredJoin::new(PredColumn { pred: 2, pos: z }, PredColumn { pred: 3, pos: Pos::S });
        let m3 = c.merge_on(m, t3, j23).unwrap();
        let mut got3 = rows(&c, m3);
        got3.sort();
        prop_assert_eq!(got3, nested(&two, 2 + col(z), &rows(&c, t3), 0));

        let def = c.def(m3).unwrap();
        prop_assert_eq!(def.columns.len(), 6);
        for (i, &p) in def.constituents.iter().enumerate() {
            prop_assert_eq!(&def.columns[2 * i], &format!("{}s", constituent_prefix(i)));
            prop_assert_eq!(&def.columns[2 * i + 1], &format!("{}o", constituent_prefix(i)));
            prop_assert_eq!(p, [1, 2, 3][i]);
        }
    }

    #[test]
    fn scan_cost_grows_with_rows(data in triples(2, 10, 100), extra in triples(2, 10, 50), constant in prop::option::of(0u32..10)) {
        let text = match constant {
            Some(o) => format!("QUERY q\nPATTERN a p=p1 o=e{o}\nSELECT a.s\nEND\n"),
            None => "QUERY q\nPATTERN a p=p1\nSELECT a.s\nEND\n".to_owned(),
        };
        let q = parse(&text);
        let small = Catalog::from_triples(&data).unwrap();
        let big = Catalog::from_triples(&[data.clone(), extra].concat()).unwrap();
        let cost = |c: &Catalog| execute(c, &baseline_plan(&q, c), MeasureMode::CostModel, 1).unwrap().1.cost;
        prop_assert!(cost(&big) >= cost(&small));
    }

    #[test]
    fn rewrites_are_sound_and_keep_constants(data in triples(3, 12, 150), text in query_text()) {
        let q = parse(&text);
        let mut c = Catalog::from_triples(&data).unwrap();
        let seq = generate_table_sequence(&q, &mut c).unwrap();
        let items = enumerate_priority_items(&seq, &q, &c).unwrap();
        let (base, _) = execute(&c, &baseline_plan(&q, &c), MeasureMode::CostModel, 1).unwrap();
        let mut constants: BTreeMap<String, usize> = BTreeMap::new();
        for p in &q.patterns {
            for v in p.s_const.iter().chain(&p.o_const) {
                *constants.entry(v.clone()).or_default() += 1;
            }
        }
        for item in &items {
            let rw = apply_rewrite(&q, &item.assignment, &c).unwrap();
            let (rs, _) = execute_rewrite(&c, &rw, MeasureMode::CostModel, 1).unwrap();
            prop_assert!(results_equal(&base, &rs).unwrap());
            let mut filters: BTreeMap<String, usize> = BTreeMap::new();
            for f in &rw.residual_filters {
                *filters.entry(f.value.clone()).or_default() += 1;
            }
            for (v, n) in &constants {
                prop_assert!(filters.get(v).copied().unwrap_or(0) >= *n, "constant {} dropped", v);
            }
        }
        let list = build_priority_list(&q, items, &c, MeasureMode::CostModel, 1).unwrap();
        let times: Vec<f64> = list.items.iter().map(|i| i.execute_time.unwrap()).collect();
        prop_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        for item in &list.items {
            prop_assert_eq!(closure(item.choose_info.iter().copied()), item.choose_info.clone());
        }
    }

    #[test]
    fn print_parse_round_trip(text in query_text()) {
        let q = parse(&text);
        let back = parse_workload(&print_workload(std::slice::from_ref(&q)), "printed").unwrap();
        prop_assert_eq!(back, vec![q]);
    }

    #[test]
    fn closure_is_transitive(pairs in prop::collection::vec((0usize..4, position(), 0usize..4, position()), 0..8)) {
        let conds: Vec<JoinCondition> = pairs
            .iter()
            .filter_map(|&(a, x, b, y)| JoinCondition::new(AliasColumn::new(a, x), AliasColumn::new(b, y)))
            .collect();
        let closed = closure(conds.iter().copied());
        for c in &conds {
            prop_assert!(closed.contains(c));
        }
        for a in &closed {
            for b in &closed {
                let ends = [a.left(), a.right()];
                for &(u, v) in &[(b.left(), b.right()), (b.right(), b.left())] {
                    if ends.contains(&u) {
                        let other = if ends[0] == u { ends[1] } else { ends[0] };
                        if let Some(j) = JoinCondition::new(other, v) {
                            prop_assert!(closed.contains(&j));
                        }
                    }
                }
            }
        }
        prop_assert_eq!(closure(closed.iter().copied()), closed);
    }

    #[test]
    fn encoding_depends_only_on_tables(data in triples(3, 8, 60), order in Just([1u32, 2, 3]).prop_shuffle()) {
        let mut a = Catalog::from_triples(&data).unwrap();
        let mut b = a.clone();
        for &p in &order {
            a.divide(p).unwrap();
            b.divide(p).unwrap();
        }
        prop_assert_eq!(encode_state(&a, 100).unwrap(), encode_state(&b, 100).unwrap());
        let v = encode_state(&a, 100).unwrap();
        let first_zero = v.iter().position(|&x| x == 0).unwrap();
        prop_assert!(v[first_zero..].iter().all(|&x| x == 0));
        prop_assert!(v.iter().all(|&x| x <= 4));
    }

    #[test]
    fn masked_argmax_is_legal(q in prop::collection::vec(-5.0f64..5.0, 1..10), seed in any::<u64>()) {
        let mask: Vec<bool> = (0..q.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        match masked_argmax(&q, &mask) {
            Some(i) => {
                prop_assert!(mask[i]);
                prop_assert!(q.iter().zip(&mask).all(|(&v, &m)| !m || v <= q[i]));
            }
            None => prop_assert!(mask.iter().all(|&m| !m)),
        }
    }

    #[test]
    fn replay_keeps_newest(capacity in 1usize..20, extra in 0usize..20) {
        let mut b = ReplayBuffer::new(capacity);
        let total = capacity + extra;
        for i in 0..total {
            b.push(Transition {
                state: vec![],
                action: i,
                reward: 0.0,
                next_state: vec![],
                done: false,
                next_mask: vec![],
            });
        }
        let kept: Vec<usize> = b.iter().map(|t| t.action).collect();
        prop_assert_eq!(kept, (extra..total).collect::<Vec<_>>());
    }
}
