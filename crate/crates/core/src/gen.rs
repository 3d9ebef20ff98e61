//! Synthetic datasets and workloads: star-shaped subjects or chains of
//! linked entities, with matching join queries.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{parse_workload, QuerySpec};
use crate::storage::{format_triple, Catalog, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    #[default]
    Star,
    Path,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Shape> {
        match s {
            "star" => Ok(Shape::Star),
            "path" => Ok(Shape::Path),
            other => Err(Error::Config(format!("unknown shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub shape: Shape,
    pub predicates: usize,
    /// Subjects (star) or entities per layer (path).
    pub rows: usize,
    pub queries: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            shape: Shape::Star,
            predicates: 5,
            rows: 1000,
            queries: 3,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub triples: Vec<Triple>,
    pub workload_text: String,
}

impl Generated {
    pub fn ntriples(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&format_triple(t));
            out.push('\n');
        }
        out
    }

    pub fn catalog(&self) -> Result<Catalog> {
        Catalog::from_triples(&self.triples)
    }

    pub fn workload(&self) -> Result<Vec<QuerySpec>> {
        parse_workload(&self.workload_text, "generated workload")
    }
}

fn pred(j: usize) -> String {
    format!("<ex:p{j}>")
}

fn value(j: usize, r: usize) -> String {
    format!("<ex:v{j}_{r}>")
}

pub fn generate(cfg: &GenConfig) -> Result<Generated> {
    if cfg.predicates == 0 || cfg.rows == 0 || cfg.queries == 0 {
        return Err(Error::Config("predicates, rows and queries must be positive".to_owned()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.predicates;
    let width = k.min(3);
    let mut triples = Vec::new();
    let mut workload = String::new();
    match cfg.shape {
        Shape::Star => {
            for i in 0..cfg.rows {
                let s = format!("<ex:s{i}>");
                for j in 1..=k {
                    if j == 1 || rng.random_bool(0.75) {
                        let domain = 10 * j;
                        triples.push(Triple::new(&s, pred(j), value(j, rng.random_range(0..domain))));
                    }
                }
            }
            for qi in 0..cfg.queries {
                let preds: Vec<usize> = (0..width).map(|x| (qi + x) % k + 1).collect();
                let _ = writeln!(workload, "QUERY star{}", qi + 1);
                for (x, &j) in preds.iter().enumerate() {
                    let alias = (b'a' + x as u8) as char;
                    if x == 0 {
                        let _ = writeln!(workload, "PATTERN {alias} p={} o={}", pred(j), value(j, qi % (10 * j)));
                    } else {
                        let _ = writeln!(workload, "PATTERN {alias} p={}", pred(j));
                        let _ = writeln!(workload, "JOIN a.s={alias}.s");
                    }
                }
                let last = (b'a' + width as u8 - 1) as char;
                let _ = writeln!(workload, "SELECT a.s, {last}.o\nEND");
            }
        }
        Shape::Path => {
            for j in 1..=k {
                for i in 0..cfg.rows {
                    if rng.random_bool(0.8) {
                        let s = format!("<ex:e{}_{i}>", j - 1);
                        let o = format!("<ex:e{j}_{}>", rng.random_range(0..cfg.rows));
                        triples.push(Triple::new(s, pred(j), o));
                    }
                }
            }
            for qi in 0..cfg.queries {
                let start = qi % (k - width + 1) + 1;
                let _ = writeln!(workload, "QUERY path{}", qi + 1);
                for x in 0..width {
                    let alias = (b'a' + x as u8) as char;
                    let _ = writeln!(workload, "PATTERN {alias} p={}", pred(start + x));
                    if x > 0 {
                        let prev = (b'a' + x as u8 - 1) as char;
                        let _ = writeln!(workload, "JOIN {prev}.o={alias}.s");
                    }
                }
                let last = (b'a' + width as u8 - 1) as char;
                let _ = writeln!(workload, "SELECT a.s, {last}.o\nEND");
            }
        }
    }
    if triples.is_empty() {
        return Err(Error::EmptyInput("generated dataset".to_owned()));
    }
    Ok(Generated {
        triples,
        workload_text: workload,
    })
}
