//! Workload file grammar:
//!
//! ```text
//! QUERY <name>
//! PATTERN <alias> p=<iri> [s=<term>] [o=<term>]
//! JOIN <alias>.<s|o>=<alias>.<s|o>
//! SELECT <alias>.<s|o>[, ...]
//! END
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::query::{AliasColumn, JoinCondition, QuerySpec, TriplePattern};
use crate::storage::ntriples::read_term;
use crate::storage::Pos;

struct Builder {
    name: String,
    patterns: Vec<TriplePattern>,
    joins: BTreeSet<JoinCondition>,
    projections: Option<Vec<AliasColumn>>,
}

fn parse_column(q: &Builder, token: &str) -> std::result::Result<AliasColumn, String> {
    let (alias, pos) = token
        .trim()
        .rsplit_once('.')
        .ok_or_else(|| format!("expected <alias>.<s|o>, found `{token}`"))?;
    let pos = Pos::parse(pos).ok_or_else(|| format!("unknown position `{pos}` in `{token}`"))?;
    let alias = q
        .patterns
        .iter()
        .position(|p| p.alias == alias)
        .ok_or_else(|| format!("undeclared alias `{alias}`"))?;
    Ok(AliasColumn { alias, pos })
}

fn parse_pattern(rest: &str) -> std::result::Result<TriplePattern, String> {
    let rest = rest.trim_start();
    let split = rest.find(char::is_whitespace).unwrap_or(rest.len());
    let (alias, mut rest) = rest.split_at(split);
    if alias.is_empty() {
        return Err("PATTERN needs an alias".to_owned());
    }
    let mut pattern = TriplePattern {
        alias: alias.to_owned(),
        predicate: String::new(),
        s_const: None,
        o_const: None,
    };
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        let (key, value) = rest
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found `{rest}`"))?;
        let (term, tail) = read_term(value)?.ok_or_else(|| format!("missing value for `{key}`"))?;
        if term.starts_with('?') {
            return Err(format!("variable `{term}` is not supported for `{key}`"));
        }
        let slot = match key {
            "p" if pattern.predicate.is_empty() => {
                pattern.predicate = term.to_owned();
                None
            }
            "s" if pattern.s_const.is_none() => Some(&mut pattern.s_const),
            "o" if pattern.o_const.is_none() => Some(&mut pattern.o_const),
            "p" | "s" | "o" => return Err(format!("`{key}` given twice")),
            other => return Err(format!("unknown pattern key `{other}`")),
        };
        if let Some(slot) = slot {
            *slot = Some(term.to_owned());
        }
        rest = tail;
    }
    if pattern.predicate.is_empty() {
        return Err(format!("pattern `{}` has no constant predicate", pattern.alias));
    }
    Ok(pattern)
}

fn finish(b: Builder) -> std::result::Result<QuerySpec, String> {
    if b.patterns.is_empty() {
        return Err(format!("query `{}` has no patterns", b.name));
    }
    let projections = b
        .projections
        .ok_or_else(|| format!("query `{}` has no SELECT", b.name))?;
    let q = QuerySpec {
        name: b.name,
        patterns: b.patterns,
        joins: b.joins,
        projections,
    };
    if !q.is_connected() {
        return Err(format!("join graph of `{}` is disconnected", q.name));
    }
    Ok(q)
}

/// Parses a workload file into queries, in file order.
pub fn parse_workload(text: &str, source_name: &str) -> Result<Vec<QuerySpec>> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_owned(),
        line,
        message,
    };
    let mut queries: Vec<QuerySpec> = Vec::new();
    let mut current: Option<Builder> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match (keyword, current.as_mut()) {
            ("QUERY", None) => {
                let name = rest.trim();
                if name.is_empty() {
                    return Err(err(lineno, "QUERY needs a name".to_owned()));
                }
                if queries.iter().any(|q| q.name == name) {
                    return Err(err(lineno, format!("duplicate query name `{name}`")));
                }
                current = Some(Builder {
                    name: name.to_owned(),
                    patterns: Vec::new(),
                    joins: BTreeSet::new(),
                    projections: None,
                });
            }
            ("QUERY", Some(_)) => return Err(err(lineno, "missing END before QUERY".to_owned())),
            (_, None) => return Err(err(lineno, format!("`{keyword}` outside a QUERY block"))),
            ("PATTERN", Some(b)) => {
                let pattern = parse_pattern(rest).map_err(|m| err(lineno, m))?;
                if b.patterns.iter().any(|p| p.alias == pattern.alias) {
                    return Err(err(lineno, format!("duplicate alias `{}`", pattern.alias)));
                }
                b.patterns.push(pattern);
            }
            ("JOIN", Some(b)) => {
                let compact: String = rest.split_whitespace().collect();
                let (l, r) = compact
                    .split_once('=')
                    .ok_or_else(|| err(lineno, "JOIN needs `=`".to_owned()))?;
                let l = parse_column(b, l).map_err(|m| err(lineno, m))?;
                let r = parse_column(b, r).map_err(|m| err(lineno, m))?;
                let j = JoinCondition::new(l, r)
                    .ok_or_else(|| err(lineno, "join of a column with itself".to_owned()))?;
                b.joins.insert(j);
            }
            ("SELECT", Some(b)) => {
                if b.projections.is_some() {
                    return Err(err(lineno, "SELECT given twice".to_owned()));
                }
                let cols = rest
                    .split(',')
                    .map(|t| parse_column(b, t))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|m| err(lineno, m))?;
                b.projections = Some(cols);
            }
            ("END", Some(_)) => {
                let b = current.take().expect("inside block");
                queries.push(finish(b).map_err(|m| err(lineno, m))?);
            }
            (other, Some(_)) => return Err(err(lineno, format!("unknown keyword `{other}`"))),
        }
    }
    if current.is_some() {
        return Err(err(last_line, "unterminated QUERY block".to_owned()));
    }
    if queries.is_empty() {
        return Err(Error::EmptyInput(source_name.to_owned()));
    }
    Ok(queries)
}

pub fn print_query(q: &QuerySpec) -> String {
    let mut out = format!("QUERY {}\n", q.name);
    for p in &q.patterns {
        out.push_str(&format!("PATTERN {} p={}", p.alias, p.predicate));
        if let Some(s) = &p.s_const {
            out.push_str(&format!(" s={s}"));
        }
        if let Some(o) = &p.o_const {
            out.push_str(&format!(" o={o}"));
        }
        out.push('\n');
    }
    for j in &q.joins {
        out.push_str(&format!("JOIN {}\n", q.join_name(j)));
    }
    let cols: Vec<String> = q.projections.iter().map(|&c| q.column_name(c)).collect();
    out.push_str(&format!("SELECT {}\nEND\n", cols.join(", ")));
    out
}

pub fn print_workload(queries: &[QuerySpec]) -> String {
    queries
        .iter()
        .map(print_query)
        .collect::<Vec<_>>()
        .join("\n")
}
