use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use triplayout_core::agent::{
    greedy_layout, improvement, train, Agent, Checkpoint, CHECKPOINT_VERSION,
};
use triplayout_core::env::{EnvConfig, LayoutPlan, StorageEnv};
use triplayout_core::gen::{generate, GenConfig, Shape};
use triplayout_core::rewriter::{build_priority_list, enumerate_priority_items, generate_table_sequence};
use triplayout_core::storage::{MeasureMode, PredCode};
use triplayout_core::{Error, Result};

use crate::config::{create_dir, write_file, Inputs, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub triples: usize,
    pub predicates: usize,
    pub dictionary: Vec<(String, PredCode)>,
    pub queries: Vec<String>,
    pub content_hash: String,
}

pub fn ingest(data: &Path, workload: &Path) -> Result<IngestSummary> {
    let inputs = Inputs::load(data, workload)?;
    Ok(IngestSummary {
        triples: inputs.catalog.triple_count(),
        predicates: inputs.catalog.predicate_count(),
        dictionary: inputs.catalog.predicate_dict(),
        queries: inputs.workload.iter().map(|q| q.name.clone()).collect(),
        content_hash: inputs.content_hash(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub episodes: usize,
    pub t1: f64,
    pub t2: f64,
    pub improvement: f64,
    pub tables: usize,
    pub output_dir: PathBuf,
}

/// Trains on the configured inputs and writes the checkpoint, layout,
/// episode report, trace and per-query priority lists.
pub fn train_cmd(config_path: &Path) -> Result<TrainSummary> {
    let cfg = RunConfig::load(config_path)?;
    let inputs = Inputs::load(&cfg.data, &cfg.workload)?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    create_dir(&out.join("priority"))?;

    for q in &inputs.workload {
        let mut full = inputs.catalog.clone();
        let seq = generate_table_sequence(q, &mut full)?;
        let items = enumerate_priority_items(&seq, q, &full)?;
        let list = build_priority_list(q, items, &full, cfg.env.mode, cfg.env.repeats)?;
        let path = out.join("priority").join(format!("{}.csv", file_stem(&q.name)));
        list.write_csv(&full, create(&path)?)?;
    }

    let hash = inputs.content_hash();
    let mut env = StorageEnv::new(inputs.catalog, inputs.workload, cfg.env.clone())?;
    let mut agent = Agent::new(cfg.agent.clone(), env.config().vector_dim, env.actions().len())?;
    let report = train(&mut env, &mut agent, cfg.episodes)?;

    report.write_csv(create(&out.join("episodes.csv"))?)?;
    report.write_trace(create(&out.join("trace.jsonl"))?)?;
    write_file(&out.join("layout.json"), serde_json::to_string_pretty(&report.layout)?)?;
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        content_hash: hash,
        layer_dims: agent.prediction.dims(),
        network: agent.prediction.clone(),
        env: cfg.env.clone(),
        agent: cfg.agent.clone(),
        predicate_dict: env.catalog().predicate_dict(),
        actions: env.actions().iter().map(|a| a.describe(env.catalog())).collect(),
        layout: report.layout.clone(),
        best_actions: report.best_actions.clone(),
        baseline_time: report.baseline_time,
        best_time: report.best_time,
        run: serde_json::to_value(&cfg)?,
    };
    checkpoint.save(&out.join("checkpoint.json"))?;
    Ok(TrainSummary {
        episodes: report.episodes.len(),
        t1: report.baseline_time,
        t2: report.best_time,
        improvement: improvement(report.baseline_time, report.best_time),
        tables: report.layout.tables.len(),
        output_dir: out.clone(),
    })
}

fn run_path(ck: &Checkpoint, field: &str, given: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = given {
        return Ok(p.to_path_buf());
    }
    ck.run
        .get(field)
        .and_then(|v| v.as_str())
        .map(PathBuf::from)
        .ok_or_else(|| Error::Config(format!("checkpoint records no {field} path; pass --{field}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplySummary {
    pub t1: f64,
    pub t2: f64,
    pub improvement: f64,
    pub tables: usize,
    pub layout: PathBuf,
    pub rewritten: PathBuf,
}

pub struct ApplyArgs<'a> {
    pub checkpoint: &'a Path,
    pub data: Option<&'a Path>,
    pub workload: Option<&'a Path>,
    pub out: &'a Path,
    pub greedy: bool,
}

/// Rebuilds the checkpoint's layout (or a greedy rollout of its network)
/// and writes the layout and each query's selected rewrite.
pub fn apply(args: ApplyArgs<'_>) -> Result<ApplySummary> {
    let ck = Checkpoint::load(args.checkpoint)?;
    let data = run_path(&ck, "data", args.data)?;
    let workload = run_path(&ck, "workload", args.workload)?;
    let inputs = Inputs::load(&data, &workload)?;
    ck.verify(&inputs.dataset_text, &inputs.workload_text)?;

    let mut env = StorageEnv::new(inputs.catalog, inputs.workload, ck.env.clone())?;
    if args.greedy {
        if env.actions().len() != ck.network.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: ck.network.output_dim(),
                actual: env.actions().len(),
            });
        }
        let mut agent = Agent::with_networks(ck.agent.clone(), ck.network.clone(), ck.network.clone())?;
        greedy_layout(&mut env, &mut agent)?;
    } else {
        env.apply_layout(&ck.layout)?;
    }

    create_dir(args.out)?;
    let layout = LayoutPlan::from_catalog(env.catalog());
    let layout_path = args.out.join("applied_layout.json");
    write_file(&layout_path, serde_json::to_string_pretty(&layout)?)?;
    let mut sql = String::new();
    for (q, rw) in env.workload().iter().zip(env.selected_rewrites()?) {
        sql.push_str(&format!("-- {}\n{};\n", q.name, rw.to_sql(env.catalog())));
    }
    let rewritten = args.out.join("rewritten.sql");
    write_file(&rewritten, sql)?;
    Ok(ApplySummary {
        t1: env.baseline_time(),
        t2: env.current_time(),
        improvement: improvement(env.baseline_time(), env.current_time()),
        tables: layout.tables.len(),
        layout: layout_path,
        rewritten,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBench {
    pub query: String,
    pub t1: f64,
    pub t2: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: MeasureMode,
    pub repeats: usize,
    pub queries: Vec<QueryBench>,
    pub total_t1: f64,
    pub total_t2: f64,
    pub improvement: f64,
    pub space_rows: usize,
}

pub struct BenchArgs<'a> {
    pub layout: &'a Path,
    pub data: &'a Path,
    pub workload: &'a Path,
    pub mode: MeasureMode,
    pub repeats: usize,
    pub out: &'a Path,
    pub episodes: Option<&'a Path>,
}

/// Times every query on `t0` and on the given layout, query by query.
pub fn bench(args: BenchArgs<'_>) -> Result<BenchReport> {
    let text = std::fs::read_to_string(args.layout).map_err(|e| Error::io(args.layout, e))?;
    let layout: LayoutPlan = serde_json::from_str(&text)?;
    let inputs = Inputs::load(args.data, args.workload)?;
    let cfg = EnvConfig {
        mode: args.mode,
        repeats: args.repeats,
        ..EnvConfig::default()
    };
    let mut env = StorageEnv::new(inputs.catalog, inputs.workload, cfg)?;
    let before = env.query_times().to_vec();
    env.apply_layout(&layout)?;
    let after = env.query_times().to_vec();
    let queries: Vec<QueryBench> = env
        .workload()
        .iter()
        .zip(before.iter().zip(&after))
        .map(|(q, (&t1, &t2))| QueryBench {
            query: q.name.clone(),
            t1,
            t2,
            improvement: improvement(t1, t2),
        })
        .collect();
    let total_t1: f64 = queries.iter().map(|q| q.t1).sum();
    let total_t2: f64 = queries.iter().map(|q| q.t2).sum();
    let report = BenchReport {
        mode: args.mode,
        repeats: args.repeats,
        total_t1,
        total_t2,
        improvement: improvement(total_t1, total_t2),
        space_rows: layout.total_rows(),
        queries,
    };

    create_dir(args.out)?;
    write_file(&args.out.join("bench.json"), serde_json::to_string_pretty(&report)?)?;
    let mut w = csv::Writer::from_writer(create(&args.out.join("bench.csv"))?);
    for q in &report.queries {
        w.serialize(q)?;
    }
    w.serialize(QueryBench {
        query: "total".to_owned(),
        t1: total_t1,
        t2: total_t2,
        improvement: report.improvement,
    })?;
    w.flush().map_err(|e| Error::io(args.out.join("bench.csv"), e))?;

    if let Some(path) = args.episodes {
        #[derive(Deserialize, Serialize)]
        struct Point {
            episode: usize,
            t1: f64,
            t2: f64,
        }
        let mut r = csv::Reader::from_path(path)?;
        let mut w = csv::Writer::from_writer(create(&args.out.join("plot_episodes.csv"))?);
        for row in r.deserialize::<Point>() {
            w.serialize(row?)?;
        }
        w.flush().map_err(|e| Error::io(args.out.join("plot_episodes.csv"), e))?;
    }
    Ok(report)
}

pub fn gen(shape: Shape, predicates: usize, rows: usize, queries: usize, seed: u64, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let g = generate(&GenConfig {
        shape,
        predicates,
        rows,
        queries,
        seed,
    })?;
    create_dir(out)?;
    let data = out.join("data.nt");
    let workload = out.join("workload.txt");
    write_file(&data, g.ntriples())?;
    write_file(&workload, &g.workload_text)?;
    Ok((data, workload))
}
