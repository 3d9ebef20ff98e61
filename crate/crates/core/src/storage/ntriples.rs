//! Line-oriented N-Triples reader.
//!
//! Accepts `<iri>`, `_:blank`, `"literal"` (with optional `@lang` or
//! `^^<datatype>`) and bare whitespace-free tokens. Terms are kept verbatim,
//! so `<a>` and `a` are different terms.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub s: String,
    pub p: String,
    pub o: String,
}

impl Triple {
    pub fn new(s: impl Into<String>, p: impl Into<String>, o: impl Into<String>) -> Self {
        Triple {
            s: s.into(),
            p: p.into(),
            o: o.into(),
        }
    }
}

/// Reads one term token starting at the beginning of `input`.
///
/// Returns the token and the unconsumed remainder, or `None` if `input` is
/// empty after trimming.
pub(crate) fn read_term(input: &str) -> std::result::Result<Option<(&str, &str)>, String> {
    let input = input.trim_start();
    if input.is_empty() {
        return Ok(None);
    }
    let bytes = input.as_bytes();
    let end = match bytes[0] {
        b'<' => match input.find('>') {
            Some(i) => i + 1,
            None => return Err("unterminated IRI".to_owned()),
        },
        b'"' => {
            let mut i = 1;
            let mut closed = None;
            while i < bytes.len() {
                match bytes[i] {
                    b'\\' => i += 2,
                    b'"' => {
                        closed = Some(i);
                        break;
                    }
                    _ => i += 1,
                }
            }
            let Some(close) = closed else {
                return Err("unterminated literal".to_owned());
            };
            let mut end = close + 1;
            let rest = &input[end..];
            if let Some(tail) = rest.strip_prefix("^^") {
                if !tail.starts_with('<') {
                    return Err("datatype must be an IRI".to_owned());
                }
                match tail.find('>') {
                    Some(i) => end += 2 + i + 1,
                    None => return Err("unterminated datatype IRI".to_owned()),
                }
            } else if rest.starts_with('@') {
                end += rest
                    .find(|c: char| c.is_whitespace())
                    .unwrap_or(rest.len());
            }
            end
        }
        _ => input
            .find(|c: char| c.is_whitespace())
            .unwrap_or(input.len()),
    };
    Ok(Some((&input[..end], &input[end..])))
}

fn parse_line(line: &str) -> std::result::Result<Option<Triple>, String> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut rest = trimmed;
    let mut terms = Vec::with_capacity(3);
    for _ in 0..3 {
        match read_term(rest)? {
            Some((term, tail)) if term != "." => {
                terms.push(term.to_owned());
                rest = tail;
            }
            _ => return Err(format!("expected 3 terms, found {}", terms.len())),
        }
    }
    let tail = rest.trim();
    // A bare object token may have swallowed the terminating dot.
    let tail = if tail.is_empty() && terms[2].len() > 1 && terms[2].ends_with('.') {
        let o = terms.pop().unwrap();
        terms.push(o[..o.len() - 1].to_owned());
        "."
    } else {
        tail
    };
    let after_dot = tail
        .strip_prefix('.')
        .ok_or_else(|| "missing terminating `.`".to_owned())?
        .trim();
    if !after_dot.is_empty() && !after_dot.starts_with('#') {
        return Err(format!("unexpected trailing input `{after_dot}`"));
    }
    let o = terms.pop().unwrap();
    let p = terms.pop().unwrap();
    let s = terms.pop().unwrap();
    Ok(Some(Triple { s, p, o }))
}

/// Parses N-Triples text. `source_name` is used in error messages.
pub fn parse_ntriples(text: &str, source_name: &str) -> Result<Vec<Triple>> {
    let mut triples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        match parse_line(line) {
            Ok(Some(t)) => triples.push(t),
            Ok(None) => {}
            Err(message) => {
                return Err(Error::Parse {
                    source_name: source_name.to_owned(),
                    line: idx + 1,
                    message,
                })
            }
        }
    }
    if triples.is_empty() {
        return Err(Error::EmptyInput(source_name.to_owned()));
    }
    Ok(triples)
}

/// Formats a triple as one N-Triples line.
pub fn format_triple(t: &Triple) -> String {
    format!("{} {} {} .", t.s, t.p, t.o)
}
