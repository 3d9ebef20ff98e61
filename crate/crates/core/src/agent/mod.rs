//! Double deep Q-learning over the layout environment.

pub mod checkpoint;
pub mod ddqn;
pub mod network;
pub mod replay;
pub mod train;

pub use checkpoint::{content_hash, Checkpoint, CHECKPOINT_VERSION};
pub use ddqn::{masked_argmax, select_action, Agent, AgentConfig};
pub use network::{Layer, QNetwork, Target};
pub use replay::ReplayBuffer;
pub use train::{best_prefix, greedy_layout, improvement, train, EpisodeRecord, TrainReport};
