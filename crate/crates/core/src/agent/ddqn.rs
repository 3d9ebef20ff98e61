use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::network::{QNetwork, Target};
use crate::agent::replay::ReplayBuffer;
use crate::env::Transition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Multiplied into epsilon after every episode.
    pub epsilon_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Episodes between target-network syncs.
    pub target_sync_period: usize,
    /// Gradient steps after each episode.
    pub updates_per_episode: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.9,
            learning_rate: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.95,
            batch_size: 32,
            buffer_capacity: 2000,
            target_sync_period: 5,
            updates_per_episode: 8,
            hidden: vec![128, 192, 256],
            seed: 7,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if !(0.0 < self.epsilon_end && self.epsilon_end <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return bad("epsilon must satisfy 0 < end <= start <= 1");
        }
        if !(0.0 < self.epsilon_decay && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.target_sync_period == 0 {
            return bad("batch_size, buffer_capacity and target_sync_period must be positive");
        }
        if self.hidden.is_empty() || self.hidden.windows(2).any(|w| w[0] > w[1]) {
            return bad("hidden widths must be non-empty and non-decreasing");
        }
        if self.hidden[0] <= input_dim {
            return bad("first hidden width must exceed the input dimension");
        }
        Ok(())
    }

    pub fn layer_dims(&self, input_dim: usize, actions: usize) -> Vec<usize> {
        let mut d = vec![input_dim];
        d.extend(&self.hidden);
        d.push(actions);
        d
    }
}

/// Index of the largest legal value; ties go to the smallest index.
pub fn masked_argmax(q: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &legal)) in q.iter().zip(mask).enumerate() {
        if legal && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// Epsilon-greedy choice among legal actions.
pub fn select_action<R: Rng>(
    net: &QNetwork,
    state: &[f64],
    epsilon: f64,
    mask: &[bool],
    rng: &mut R,
) -> Result<usize> {
    if mask.len() != net.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.output_dim(),
            actual: mask.len(),
        });
    }
    let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if legal.is_empty() {
        return Err(Error::EmptyMask);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(legal[rng.random_range(0..legal.len())]);
    }
    let q = net.forward(state)?;
    Ok(masked_argmax(&q, mask).unwrap())
}

pub struct Agent {
    pub config: AgentConfig,
    pub prediction: QNetwork,
    pub target: QNetwork,
    pub buffer: ReplayBuffer,
    pub epsilon: f64,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(config: AgentConfig, input_dim: usize, actions: usize) -> Result<Agent> {
        config.validate(input_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let prediction = QNetwork::random(&config.layer_dims(input_dim, actions), &mut rng)?;
        Ok(Agent {
            target: prediction.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            epsilon: config.epsilon_start,
            prediction,
            config,
            rng,
        })
    }

    /// Agent around given networks, for tests and restored checkpoints.
    pub fn with_networks(config: AgentConfig, prediction: QNetwork, target: QNetwork) -> Result<Agent> {
        if prediction.dims() != target.dims() {
            return Err(Error::Config("prediction and target shapes differ".to_owned()));
        }
        Ok(Agent {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            epsilon: config.epsilon_start,
            prediction,
            target,
            config,
        })
    }

    pub fn act(&mut self, state: &[f64], mask: &[bool]) -> Result<usize> {
        select_action(&self.prediction, state, self.epsilon, mask, &mut self.rng)
    }

    pub fn greedy(&self, state: &[f64], mask: &[bool]) -> Result<usize> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        select_action(&self.prediction, state, 0.0, mask, &mut unused)
    }

    /// Double-Q targets: the next action is chosen by the prediction net and
    /// valued by the target net.
    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                if t.done || self.config.gamma == 0.0 {
                    return Ok(t.reward);
                }
                let q_pred = self.prediction.forward(&t.next_state)?;
                match masked_argmax(&q_pred, &t.next_mask) {
                    Some(a) => {
                        let q_target = self.target.forward(&t.next_state)?;
                        Ok(t.reward + self.config.gamma * q_target[a])
                    }
                    None => Ok(t.reward),
                }
            })
            .collect()
    }

    /// One gradient step on the prediction net; returns the batch loss
    /// before the update.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("empty training batch".to_owned()));
        }
        let ys = self.td_targets(batch)?;
        let targets: Vec<Target<'_>> = batch
            .iter()
            .zip(&ys)
            .map(|(t, &y)| Target {
                input: &t.state,
                output: t.action,
                value: y,
            })
            .collect();
        let (loss, grad) = self.prediction.gradients(&targets)?;
        self.prediction.sgd_step(&grad, self.config.learning_rate);
        Ok(loss)
    }

    /// Samples `updates_per_episode` batches from the pool and trains on
    /// each; returns the mean loss, or `None` with an empty pool.
    pub fn learn(&mut self) -> Result<Option<f64>> {
        if self.buffer.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for _ in 0..self.config.updates_per_episode {
            let batch: Vec<Transition> = self
                .buffer
                .sample(self.config.batch_size, &mut self.rng)
                .into_iter()
                .cloned()
                .collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            total += self.train_step(&refs)?;
        }
        Ok(Some(total / self.config.updates_per_episode.max(1) as f64))
    }

    pub fn sync_target(&mut self) {
        self.target = self.prediction.clone();
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_end);
    }
}
