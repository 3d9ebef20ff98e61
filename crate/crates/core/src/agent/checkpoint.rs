use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::ddqn::AgentConfig;
use crate::agent::network::QNetwork;
use crate::env::{EnvConfig, LayoutPlan};
use crate::error::{Error, Result};
use crate::storage::PredCode;

pub const CHECKPOINT_VERSION: u32 = 1;

/// SHA-256 over the dataset and workload texts, each prefixed by its
/// length.
pub fn content_hash(dataset: &str, workload: &str) -> String {
    let mut h = Sha256::new();
    for part in [dataset, workload] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub content_hash: String,
    pub layer_dims: Vec<usize>,
    pub network: QNetwork,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub predicate_dict: Vec<(String, PredCode)>,
    pub actions: Vec<String>,
    pub layout: LayoutPlan,
    pub best_actions: Vec<usize>,
    pub baseline_time: f64,
    pub best_time: f64,
    /// Free-form settings of the run that produced the checkpoint.
    #[serde(default)]
    pub run: serde_json::Value,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if ck.network.dims() != ck.layer_dims {
            return Err(Error::Config("checkpoint layer dims disagree with its weights".to_owned()));
        }
        Ok(ck)
    }

    pub fn verify(&self, dataset: &str, workload: &str) -> Result<()> {
        let actual = content_hash(dataset, workload);
        if actual != self.content_hash {
            return Err(Error::HashMismatch {
                expected: self.content_hash.clone(),
                actual,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let net = QNetwork::zeros(&[2, 3, 1]).unwrap();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            content_hash: content_hash("d", "w"),
            layer_dims: net.dims(),
            network: net,
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            predicate_dict: vec![("p".to_owned(), 1)],
            actions: vec!["divide(p)".to_owned()],
            layout: LayoutPlan::default(),
            best_actions: Vec::new(),
            baseline_time: 4.0,
            best_time: 4.0,
            run: serde_json::Value::Null,
        }
    }

    #[test]
    fn hash_separates_fields() {
        assert_ne!(content_hash("ab", "c"), content_hash("a", "bc"));
        assert_eq!(content_hash("x", "y").len(), 64);
    }

    #[test]
    fn round_trip_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let ck = sample();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        back.verify("d", "w").unwrap();
        assert!(matches!(back.verify("d", "w2"), Err(Error::HashMismatch { .. })));
    }
}
