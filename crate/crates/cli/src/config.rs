use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use triplayout_core::agent::{content_hash, AgentConfig};
use triplayout_core::env::EnvConfig;
use triplayout_core::query::{parse_workload, QuerySpec};
use triplayout_core::storage::{Catalog, MeasureMode};
use triplayout_core::{Error, Result};

pub const DEFAULT_SEED: u64 = 7;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_episodes() -> usize {
    20
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub workload: PathBuf,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Overrides `env.mode` when present.
    #[serde(default)]
    pub mode: Option<MeasureMode>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub agent: AgentConfig,
}

impl RunConfig {
    /// Reads a JSON config; relative paths are taken from the config's
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data, &mut cfg.workload, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(mode) = cfg.mode {
            cfg.env.mode = mode;
        }
        cfg.agent.seed = cfg.seed;
        Ok(cfg)
    }
}

/// Dataset and workload loaded together with their content hash.
pub struct Inputs {
    pub catalog: Catalog,
    pub workload: Vec<QuerySpec>,
    pub dataset_text: String,
    pub workload_text: String,
}

impl Inputs {
    pub fn load(data: &Path, workload: &Path) -> Result<Inputs> {
        let dataset_text = fs::read_to_string(data).map_err(|e| Error::io(data, e))?;
        let workload_text = fs::read_to_string(workload).map_err(|e| Error::io(workload, e))?;
        let catalog = Catalog::from_ntriples_str(&dataset_text, &data.display().to_string())?;
        let queries = parse_workload(&workload_text, &workload.display().to_string())?;
        Ok(Inputs {
            catalog,
            workload: queries,
            dataset_text,
            workload_text,
        })
    }

    pub fn content_hash(&self) -> String {
        content_hash(&self.dataset_text, &self.workload_text)
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
