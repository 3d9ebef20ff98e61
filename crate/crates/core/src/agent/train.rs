use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agent::ddqn::Agent;
use crate::env::{LayoutPlan, StorageEnv, TraceRecord, Transition};
use crate::error::{Error, Result};

/// One row of the training report. `t1` is the baseline workload time and
/// `t2` the best layout time found so far; `episode_t2` is the time at this
/// episode's best prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub t1: f64,
    pub t2: f64,
    pub improvement: f64,
    pub space_rows: usize,
    pub episode_t2: f64,
    pub epsilon: f64,
    pub steps: usize,
    /// Sum of unscaled step rewards over the whole episode.
    pub reward_sum: f64,
    /// Workload time at the last step of the episode.
    pub final_time: f64,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub baseline_time: f64,
    pub episodes: Vec<EpisodeRecord>,
    pub trace: Vec<TraceRecord>,
    /// Actions that build the best layout from `t0`.
    pub best_actions: Vec<usize>,
    pub best_time: f64,
    pub layout: LayoutPlan,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.episodes {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("episode report", e))?;
        Ok(())
    }

    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trace {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n").map_err(|e| Error::io("trace", e))?;
        }
        Ok(())
    }
}

/// Relative drop from `t1` to `t2`.
pub fn improvement(t1: f64, t2: f64) -> f64 {
    if t1 > 0.0 {
        (t1 - t2) / t1
    } else {
        0.0
    }
}

/// Position (1-based) of the largest accumulated reward; the earliest wins
/// ties.
pub fn best_prefix(rewards: &[f64]) -> usize {
    let mut acc = 0.0;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, r) in rewards.iter().enumerate() {
        acc += r;
        if acc > best.1 {
            best = (i + 1, acc);
        }
    }
    best.0
}

struct Rollout {
    transitions: Vec<Transition>,
    actions: Vec<usize>,
    raw_rewards: Vec<f64>,
    times: Vec<f64>,
    rows: Vec<usize>,
}

fn rollout(env: &mut StorageEnv, agent: &mut Agent, episode: usize, greedy: bool, trace: &mut Vec<TraceRecord>) -> Result<Rollout> {
    let sep = env.separator();
    let base_rows = env.catalog().triple_count();
    let mut features = env.reset()?.features(sep);
    let mut mask = env.legal_actions();
    let mut r = Rollout {
        transitions: Vec::new(),
        actions: Vec::new(),
        raw_rewards: Vec::new(),
        times: Vec::new(),
        rows: Vec::new(),
    };
    while !env.is_done() {
        let a = if greedy {
            agent.greedy(&features, &mask)?
        } else {
            agent.act(&features, &mask)?
        };
        let out = env.step(a)?;
        let next = out.state.features(sep);
        let next_mask = env.legal_actions();
        trace.push(TraceRecord {
            episode,
            step: env.steps(),
            action: a,
            reward: out.raw_reward,
            table_count: out.state.table_ids.len(),
            total_time: out.total_time,
        });
        r.transitions.push(Transition {
            state: std::mem::replace(&mut features, next.clone()),
            action: a,
            reward: out.reward,
            next_state: next,
            done: out.done,
            next_mask: next_mask.clone(),
        });
        r.actions.push(a);
        r.raw_rewards.push(out.raw_reward);
        r.times.push(out.total_time);
        r.rows.push(env.catalog().total_rows() - base_rows);
        mask = next_mask;
    }
    Ok(r)
}

/// Runs `episodes` epsilon-greedy episodes. Each episode's transitions up
/// to its best prefix go into the experience pool, the prediction net is
/// trained from the pool, and the target net is synced periodically.
/// Leaves `env` holding the best layout.
pub fn train(env: &mut StorageEnv, agent: &mut Agent, episodes: usize) -> Result<TrainReport> {
    let t1 = env.baseline_time();
    let mut report = TrainReport {
        baseline_time: t1,
        episodes: Vec::with_capacity(episodes),
        trace: Vec::new(),
        best_actions: Vec::new(),
        best_time: t1,
        layout: LayoutPlan::default(),
    };
    let mut best_rows = 0;
    for ep in 1..=episodes {
        let ctx = |e: Error| Error::Episode {
            episode: ep,
            source: Box::new(e),
        };
        let epsilon = agent.epsilon;
        let r = rollout(env, agent, ep, false, &mut report.trace).map_err(ctx)?;
        let k = best_prefix(&r.raw_rewards);
        let episode_t2 = if k == 0 { t1 } else { r.times[k - 1] };
        if episode_t2 < report.best_time {
            report.best_time = episode_t2;
            report.best_actions = r.actions[..k].to_vec();
            best_rows = r.rows[k - 1];
        }
        for t in r.transitions.into_iter().take(k) {
            agent.buffer.push(t);
        }
        let loss = agent.learn().map_err(ctx)?;
        agent.decay_epsilon();
        if ep % agent.config.target_sync_period == 0 {
            agent.sync_target();
        }
        report.episodes.push(EpisodeRecord {
            episode: ep,
            t1,
            t2: report.best_time,
            improvement: improvement(t1, report.best_time),
            space_rows: best_rows,
            episode_t2,
            epsilon,
            steps: r.actions.len(),
            reward_sum: r.raw_rewards.iter().sum(),
            final_time: r.times.last().copied().unwrap_or(t1),
            loss,
        });
    }
    env.replay(&report.best_actions)?;
    report.layout = LayoutPlan::from_catalog(env.catalog());
    Ok(report)
}

/// Rolls out the prediction net with epsilon 0 and keeps the best prefix.
/// Leaves `env` holding that layout; returns its actions.
pub fn greedy_layout(env: &mut StorageEnv, agent: &mut Agent) -> Result<Vec<usize>> {
    let mut trace = Vec::new();
    let r = rollout(env, agent, 0, true, &mut trace)?;
    let k = best_prefix(&r.raw_rewards);
    let actions = if k > 0 && r.times[k - 1] < env.baseline_time() {
        r.actions[..k].to_vec()
    } else {
        Vec::new()
    };
    env.replay(&actions)?;
    Ok(actions)
}
