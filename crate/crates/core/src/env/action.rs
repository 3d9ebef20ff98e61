use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::QuerySpec;
use crate::rewriter::{plan_table_sequence, Build};
use crate::storage::{Catalog, PredCode, PredJoin, TableKey};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Divide(PredCode),
    Merge {
        left: TableKey,
        right: TableKey,
        cond: PredJoin,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    /// Position in the action space; also the Q-network output index.
    pub index: usize,
    pub kind: ActionKind,
    /// Key of the table the action creates.
    pub output: TableKey,
}

impl Action {
    pub fn build(&self) -> Build {
        match &self.kind {
            ActionKind::Divide(p) => Build::Divide(*p),
            ActionKind::Merge { left, right, cond } => Build::Merge {
                left: left.clone(),
                right: right.clone(),
                cond: *cond,
            },
        }
    }

    pub fn describe(&self, catalog: &Catalog) -> String {
        let preds = |k: &TableKey| {
            let names: Vec<&str> = k.preds().iter().map(|&p| catalog.predicate_name(p)).collect();
            names.join("+")
        };
        match &self.kind {
            ActionKind::Divide(p) => format!("divide({})", catalog.predicate_name(*p)),
            ActionKind::Merge { left, right, cond } => {
                let (a, b) = cond.endpoints();
                format!(
                    "merge({}, {}, {}.{}={}.{})",
                    preds(left),
                    preds(right),
                    catalog.predicate_name(a.pred),
                    a.pos.as_str(),
                    catalog.predicate_name(b.pred),
                    b.pos.as_str()
                )
            }
        }
    }
}

/// Fixed action space for a workload: one divide per workload predicate (by
/// code), then every merge route of every query's table sequence, in
/// generation order, without duplicates.
pub fn build_action_space(workload: &[QuerySpec], catalog: &Catalog) -> Result<Vec<Action>> {
    if workload.is_empty() {
        return Err(Error::EmptyInput("workload".to_owned()));
    }
    let plans = workload
        .iter()
        .map(|q| plan_table_sequence(q, catalog))
        .collect::<Result<Vec<_>>>()?;

    let preds: BTreeSet<PredCode> = plans
        .iter()
        .flat_map(|p| p.entries.iter())
        .filter_map(|e| match e.build {
            Build::Divide(p) => Some(p),
            Build::Merge { .. } => None,
        })
        .collect();
    let mut kinds: Vec<(ActionKind, TableKey)> = preds
        .into_iter()
        .map(|p| (ActionKind::Divide(p), TableKey::Divided(p)))
        .collect();
    for plan in &plans {
        for r in &plan.routes {
            let kind = ActionKind::Merge {
                left: r.left.clone(),
                right: r.right.clone(),
                cond: r.cond,
            };
            if !kinds.iter().any(|(k, _)| *k == kind) {
                kinds.push((kind, r.output.clone()));
            }
        }
    }
    Ok(kinds
        .into_iter()
        .enumerate()
        .map(|(index, (kind, output))| Action {
            index,
            kind,
            output,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_workload;
    use crate::storage::Triple;

    fn catalog(preds: &[&str]) -> Catalog {
        let triples: Vec<Triple> = preds.iter().map(|p| Triple::new("x", *p, "y")).collect();
        Catalog::from_triples(&triples).unwrap()
    }

    #[test]
    fn example_one_action_space() {
        let c = catalog(&["type", "comment", "topic"]);
        let w = parse_workload(
            "QUERY ex1\nPATTERN a p=type\nPATTERN b p=comment\nPATTERN c p=topic\n\
             JOIN a.s=b.s\nJOIN b.o=c.s\nSELECT a.s\nEND\n",
            "w",
        )
        .unwrap();
        let actions = build_action_space(&w, &c).unwrap();
        let names: Vec<String> = actions.iter().map(|a| a.describe(&c)).collect();
        assert_eq!(
            names,
            vec![
                "divide(type)",
                "divide(comment)",
                "divide(topic)",
                "merge(type, comment, type.s=comment.s)",
                "merge(comment, topic, comment.o=topic.s)",
                "merge(type+comment, topic, comment.o=topic.s)",
                "merge(comment+topic, type, type.s=comment.s)",
            ]
        );
        assert_eq!(actions[5].output, actions[6].output);
        assert!(actions.iter().enumerate().all(|(i, a)| a.index == i));
    }

    #[test]
    fn shared_predicates_divide_once() {
        let c = catalog(&["type", "name", "age"]);
        let w = parse_workload(
            "QUERY q1\nPATTERN a p=type\nPATTERN b p=name\nJOIN a.s=b.s\nSELECT a.s\nEND\n\
             QUERY q2\nPATTERN a p=type\nPATTERN b p=age\nJOIN a.s=b.s\nSELECT a.s\nEND\n",
            "w",
        )
        .unwrap();
        let actions = build_action_space(&w, &c).unwrap();
        let divides = actions
            .iter()
            .filter(|a| matches!(a.kind, ActionKind::Divide(_)))
            .count();
        assert_eq!(divides, 3);
        assert_eq!(actions.len(), 5);
    }

    #[test]
    fn single_pattern_workload() {
        let c = catalog(&["type"]);
        let w = parse_workload("QUERY q\nPATTERN a p=type\nSELECT a.s\nEND\n", "w").unwrap();
        assert_eq!(build_action_space(&w, &c).unwrap().len(), 1);
        assert!(matches!(
            build_action_space(&[], &c),
            Err(Error::EmptyInput(_))
        ));
    }
}
