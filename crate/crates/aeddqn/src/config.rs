//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Unknown keys and repeated keys are errors. Missing keys take the defaults
//! in [`DEFAULTS`], except the dataset paths, which have none.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aeddqn_core::agent::AgentConfig;
use aeddqn_core::autoencoder::AutoencoderConfig;
use aeddqn_core::env::RewardSpec;
use aeddqn_core::svm::SvmConfig;

use crate::{Error, Result};

/// Every recognised key with its default. An empty default means "no value".
pub const DEFAULTS: &[(&str, &str)] = &[
    ("dataset.name", "mnist"),
    ("dataset.train_path", ""),
    ("dataset.test_path", ""),
    ("dataset.subset_n", "0"),
    ("ae.latent_dim", ""),
    ("ae.epochs", "10"),
    ("ae.lr", "0.001"),
    ("ae.batch", "32"),
    ("env.feature_cost", "0.005"),
    ("env.reward_correct", "1"),
    ("env.reward_wrong", "-1"),
    ("agent.gamma", "0.99"),
    ("agent.lambda", "1"),
    ("agent.epsilon_start", "1"),
    ("agent.epsilon_end", "0.05"),
    ("agent.epsilon_decay", ""),
    ("agent.train_episodes", "20000"),
    ("agent.replay_capacity", "10000"),
    ("agent.batch_episodes", "32"),
    ("agent.sync_period", "1000"),
    ("agent.lr", "0.0005"),
    ("agent.hidden", "256,256"),
    ("seed", "0"),
];

// Offsets added to `seed` for each consumer of randomness.
const AE_SEED_OFFSET: u64 = 101;
const AGENT_SEED_OFFSET: u64 = 202;
const SVM_SEED_OFFSET: u64 = 303;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl DatasetKind {
    /// Latent width used when `ae.latent_dim` is not set.
    pub fn default_latent_dim(self) -> usize {
        match self {
            DatasetKind::Mnist | DatasetKind::FashionMnist => 128,
            DatasetKind::Cifar10 => 256,
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetKind::Mnist),
            "fashion-mnist" | "fashion_mnist" | "fashionmnist" => Ok(DatasetKind::FashionMnist),
            "cifar10" | "cifar-10" => Ok(DatasetKind::Cifar10),
            other => Err(Error::Config(format!(
                "dataset.name: unknown dataset {other:?} (expected mnist, fashion-mnist or cifar10)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

fn is_known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !is_known(key) {
                return Err(Error::Config(format!(
                    "line {}: unknown key {key:?}",
                    n + 1
                )));
            }
            if values
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: key {key:?} set twice",
                    n + 1
                )));
            }
        }
        Ok(ExperimentConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !is_known(key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// The explicit value, or the default; `None` when both are empty.
    pub fn get_str(&self, key: &str) -> Result<Option<&str>> {
        let default = DEFAULTS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?;
        let v = self.values.get(key).map(String::as_str).unwrap_or(default);
        Ok((!v.is_empty()).then_some(v))
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.get_str(key)?
            .ok_or_else(|| Error::Config(format!("{key} is required but not set")))
    }

    fn parsed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        self.get_str(key)?
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("{key}: {v:?} is not {what}")))
            })
            .transpose()
    }

    pub fn get_int(&self, key: &str) -> Result<Option<u64>> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn get_real(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parsed(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(Error::Config(format!("{key}: {x} is not finite"))),
            other => Ok(other),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.parsed(key, "true or false")
    }

    fn int(&self, key: &str) -> Result<u64> {
        self.get_int(key)?
            .ok_or_else(|| Error::Config(format!("{key} is required but not set")))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        usize::try_from(self.int(key)?).map_err(|_| Error::Config(format!("{key} is too large")))
    }

    fn real(&self, key: &str) -> Result<f64> {
        self.get_real(key)?
            .ok_or_else(|| Error::Config(format!("{key} is required but not set")))
    }

    /// Every key with its resolved value, defaults included.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        DEFAULTS
            .iter()
            .map(|(k, d)| {
                (
                    k.to_string(),
                    self.values
                        .get(*k)
                        .cloned()
                        .unwrap_or_else(|| d.to_string()),
                )
            })
            .collect()
    }

    pub fn dataset(&self) -> Result<DatasetKind> {
        self.require_str("dataset.name")?.parse()
    }

    pub fn seed(&self) -> Result<u64> {
        self.int("seed")
    }

    /// `dataset.subset_n`; zero means the whole training set.
    pub fn subset_n(&self) -> Result<Option<usize>> {
        let n = self.usize("dataset.subset_n")?;
        Ok((n > 0).then_some(n))
    }

    /// Paths for the training or test split. IDX datasets take a file prefix;
    /// CIFAR-10 takes a comma-separated list of batch files.
    pub fn data_paths(&self, key: &str) -> Result<Vec<PathBuf>> {
        let raw = self.require_str(key)?;
        let paths: Vec<PathBuf> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .collect();
        if paths.is_empty() {
            return Err(Error::Config(format!("{key} is required but not set")));
        }
        Ok(paths)
    }

    pub fn latent_dim(&self) -> Result<usize> {
        match self.get_int("ae.latent_dim")? {
            Some(0) => Err(Error::Config("ae.latent_dim must be positive".into())),
            Some(n) => {
                usize::try_from(n).map_err(|_| Error::Config("ae.latent_dim is too large".into()))
            }
            None => Ok(self.dataset()?.default_latent_dim()),
        }
    }

    pub fn autoencoder(&self) -> Result<AutoencoderConfig> {
        Ok(AutoencoderConfig {
            latent_dim: self.latent_dim()?,
            epochs: self.usize("ae.epochs")?,
            batch_size: self.usize("ae.batch")?,
            lr: self.real("ae.lr")?,
            seed: self.seed()?.wrapping_add(AE_SEED_OFFSET),
            ..AutoencoderConfig::default()
        })
    }

    pub fn rewards(&self) -> Result<RewardSpec> {
        let spec = RewardSpec {
            feature_cost: self.real("env.feature_cost")?,
            reward_correct: self.real("env.reward_correct")?,
            reward_wrong: self.real("env.reward_wrong")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn agent(&self) -> Result<AgentConfig> {
        let hidden = self
            .require_str("agent.hidden")?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&h| h > 0)
                    .ok_or_else(|| {
                        Error::Config(format!("agent.hidden: {s:?} is not a positive width"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let epsilon_decay = self
            .get_int("agent.epsilon_decay")?
            .map(|v| {
                usize::try_from(v)
                    .map_err(|_| Error::Config("agent.epsilon_decay is too large".into()))
            })
            .transpose()?;
        let cfg = AgentConfig {
            gamma: self.real("agent.gamma")?,
            lambda: self.real("agent.lambda")?,
            epsilon_start: self.real("agent.epsilon_start")?,
            epsilon_end: self.real("agent.epsilon_end")?,
            epsilon_decay,
            learning_rate: self.real("agent.lr")?,
            batch_episodes: self.usize("agent.batch_episodes")?,
            target_sync_period: self.usize("agent.sync_period")?,
            replay_capacity: self.usize("agent.replay_capacity")?,
            train_episodes: self.usize("agent.train_episodes")?,
            hidden,
            seed: self.seed()?.wrapping_add(AGENT_SEED_OFFSET),
            ..AgentConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn svm(&self) -> Result<SvmConfig> {
        Ok(SvmConfig {
            seed: self.seed()?.wrapping_add(SVM_SEED_OFFSET),
            ..SvmConfig::default()
        })
    }
}
