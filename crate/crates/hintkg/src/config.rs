//! Run configuration: one TOML file plus command-line overrides.
//!
//! ```toml
//! data_dir = "data/synth"
//! out = "runs/demo"
//! task = "pairwise"
//! mode = "normal"
//! backend = "mock"
//!
//! [train]
//! dim = 64
//! max_epochs = 30
//!
//! [remote]
//! endpoint = "http://127.0.0.1:8000/v1/completions"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use hintkg_core::config::{TaskKind, TrainConfig};
use hintkg_core::discovery::{DiscoveryConfig, DiscoveryMode};
use serde::{Deserialize, Serialize};

use crate::backend::RemoteConfig;
use crate::error::{Error, Result};
use crate::synth::SynthConfig;
use crate::tsv::DataPaths;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    /// Mock that answers with a uniformly random candidate.
    Random,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(Self::Mock),
            "random" => Ok(Self::Random),
            "remote" => Ok(Self::Remote),
            _ => Err(Error::Config(format!("backend: unknown backend `{s}` (mock, random, remote)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the four TSV files.
    pub data_dir: PathBuf,
    /// Run directory; every output lands here.
    pub out: PathBuf,
    pub task: TaskKind,
    pub mode: DiscoveryMode,
    pub backend: BackendKind,
    /// Seeds instance construction, training and discovery.
    pub seed: u64,
    /// Permit ALL mode on listwise instances.
    pub allow_all_listwise: bool,
    pub train: TrainConfig,
    pub remote: RemoteConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out: PathBuf::from("runs/latest"),
            task: TaskKind::Pairwise,
            mode: DiscoveryMode::Normal,
            backend: BackendKind::Mock,
            seed: 42,
            allow_all_listwise: false,
            train: TrainConfig::default(),
            remote: RemoteConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Brings the training config in line with the run-level task and seed.
    /// Call after overrides.
    pub fn normalize(&mut self) {
        self.train.candidates = self.task.candidates();
        self.train.seed = self.seed;
        self.synth.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| match e {
            hintkg_core::Error::Config(m) => Error::Config(format!("train: {m}")),
            other => other.into(),
        })?;
        if self.train.candidates != self.task.candidates() {
            return Err(Error::Config(format!(
                "train.candidates: {} does not match task {} ({})",
                self.train.candidates,
                self.task.as_str(),
                self.task.candidates()
            )));
        }
        if self.mode == DiscoveryMode::All && self.task == TaskKind::Listwise && !self.allow_all_listwise {
            return Err(Error::Config("mode: `all` on listwise prompts needs allow_all_listwise = true".into()));
        }
        if self.backend == BackendKind::Remote {
            if self.remote.endpoint.is_empty() {
                return Err(Error::Config("remote.endpoint: must not be empty".into()));
            }
            if self.remote.temperature < 0.0 {
                return Err(Error::Config("remote.temperature: must be >= 0".into()));
            }
        }
        self.synth.validate()
    }

    pub fn data_paths(&self) -> DataPaths {
        DataPaths::in_dir(&self.data_dir)
    }

    pub fn discovery(&self) -> DiscoveryConfig {
        DiscoveryConfig {
            allow_all_listwise: self.allow_all_listwise,
            ..DiscoveryConfig::from_train(&self.train)
        }
    }
}
