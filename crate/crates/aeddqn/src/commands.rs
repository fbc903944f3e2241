//! The five pipeline stages. Each reads its inputs from the output directory
//! left by earlier stages and ends by writing a JSON run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aeddqn_core::agent::{evaluate, train};
use aeddqn_core::autoencoder::{encode, train_autoencoder, AutoencoderModel};
use aeddqn_core::svm::train_svm;
use serde::Serialize;

use crate::config::{DatasetKind, ExperimentConfig};
use crate::dataset::{load_cifar10, load_idx, RawDataset};
use crate::formats::{
    read_feature_cache, read_network, read_svm, write_feature_cache, write_network, write_svm,
};
use crate::output::{
    metrics_rows, write_atomic, write_csv, BaselineRow, EvalRow, LossRow, BASELINE_HEADER,
    EVAL_HEADER, LOSS_HEADER, METRICS_HEADER,
};
use crate::{Error, Result};

pub const ENCODER_FILE: &str = "ae_encoder.net";
pub const DECODER_FILE: &str = "ae_decoder.net";
pub const LOSS_FILE: &str = "ae_loss.csv";
pub const TRAIN_CACHE_FILE: &str = "features_train.cache";
pub const TEST_CACHE_FILE: &str = "features_test.cache";
pub const QNET_FILE: &str = "qnet.net";
pub const METRICS_FILE: &str = "metrics.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const SVM_FILE: &str = "svm.model";
pub const BASELINE_FILE: &str = "baseline.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
    pub duration_secs: f64,
}

struct Run {
    command: &'static str,
    cfg: ExperimentConfig,
    out_dir: PathBuf,
    started: Instant,
    artifacts: Vec<PathBuf>,
}

impl Run {
    fn start(command: &'static str, opts: &RunOptions) -> Result<Run> {
        let mut cfg = ExperimentConfig::load(&opts.config)?;
        if let Some(seed) = opts.seed {
            cfg.set("seed", seed.to_string())?;
        }
        std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
        Ok(Run {
            command,
            cfg,
            out_dir: opts.out_dir.clone(),
            started: Instant::now(),
            artifacts: Vec::new(),
        })
    }

    fn input(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Path for an output file, recorded for the manifest.
    fn output(&mut self, name: &str) -> PathBuf {
        let path = self.out_dir.join(name);
        self.artifacts.push(path.clone());
        path
    }

    fn finish(self) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.cfg.resolved(),
            seed: self.cfg.seed()?,
            artifacts: self.artifacts,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let json =
            serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        let path = self
            .out_dir
            .join(format!("manifest_{}.json", self.command.replace('-', "_")));
        write_atomic(&path, &json)?;
        Ok(manifest)
    }
}

fn load_split(cfg: &ExperimentConfig, key: &str) -> Result<RawDataset> {
    let kind = cfg.dataset()?;
    let name = cfg.require_str("dataset.name")?;
    let paths = cfg.data_paths(key)?;
    match kind {
        DatasetKind::Mnist | DatasetKind::FashionMnist => {
            if paths.len() != 1 {
                return Err(Error::Config(format!(
                    "{key}: IDX datasets take a single path prefix"
                )));
            }
            load_idx(&paths[0], name)
        }
        DatasetKind::Cifar10 => {
            let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
            load_cifar10(&refs, name)
        }
    }
}

/// The training split, cut to `dataset.subset_n` samples when set.
pub fn load_train(cfg: &ExperimentConfig) -> Result<RawDataset> {
    let ds = load_split(cfg, "dataset.train_path")?;
    Ok(match cfg.subset_n()? {
        Some(n) => ds.take(n),
        None => ds,
    })
}

/// The test split, always used in full.
pub fn load_test(cfg: &ExperimentConfig) -> Result<RawDataset> {
    load_split(cfg, "dataset.test_path")
}

pub fn cmd_train_ae(opts: &RunOptions) -> Result<RunManifest> {
    let mut run = Run::start("train-ae", opts)?;
    let ae_cfg = run.cfg.autoencoder()?;
    let train = load_train(&run.cfg)?;
    let (model, curve) = train_autoencoder(&train.images, &ae_cfg)?;
    write_network(&run.output(ENCODER_FILE), model.encoder())?;
    write_network(&run.output(DECODER_FILE), model.decoder())?;
    let rows = curve
        .iter()
        .enumerate()
        .map(|(i, &mse)| LossRow { epoch: i + 1, mse });
    write_csv(&run.output(LOSS_FILE), LOSS_HEADER, rows)?;
    run.finish()
}

pub fn cmd_encode(opts: &RunOptions) -> Result<RunManifest> {
    let mut run = Run::start("encode", opts)?;
    let latent = run.cfg.latent_dim()?;
    let encoder = read_network(&run.input(ENCODER_FILE))?;
    let decoder = read_network(&run.input(DECODER_FILE))?;
    let train = load_train(&run.cfg)?;
    let test = load_test(&run.cfg)?;
    let model = AutoencoderModel::from_parts(encoder, decoder, train.height(), train.width())?;
    if model.latent_dim() != latent {
        return Err(Error::Config(format!(
            "ae.latent_dim is {latent} but the stored encoder produces {}",
            model.latent_dim()
        )));
    }
    for (ds, file) in [(&train, TRAIN_CACHE_FILE), (&test, TEST_CACHE_FILE)] {
        let features = encode(
            &model,
            &ds.images,
            &ds.labels,
            ds.num_classes,
            ds.name.clone(),
        )?;
        write_feature_cache(&run.output(file), &features)?;
    }
    run.finish()
}

pub fn cmd_train_agent(opts: &RunOptions) -> Result<RunManifest> {
    let mut run = Run::start("train-agent", opts)?;
    let agent_cfg = run.cfg.agent()?;
    let rewards = run.cfg.rewards()?;
    let train_features = read_feature_cache(&run.input(TRAIN_CACHE_FILE))?;
    let test_features = read_feature_cache(&run.input(TEST_CACHE_FILE))?;
    let (qnet, log) = train(&train_features, &test_features, rewards, &agent_cfg)?;
    write_network(&run.output(QNET_FILE), &qnet)?;
    write_csv(
        &run.output(METRICS_FILE),
        METRICS_HEADER,
        metrics_rows(&log),
    )?;
    run.finish()
}

pub fn cmd_eval(opts: &RunOptions) -> Result<RunManifest> {
    let mut run = Run::start("eval", opts)?;
    let rewards = run.cfg.rewards()?;
    let qnet = read_network(&run.input(QNET_FILE))?;
    let test_features = read_feature_cache(&run.input(TEST_CACHE_FILE))?;
    let metrics = evaluate(&qnet, &test_features, rewards)?;
    let svm_path = run.input(SVM_FILE);
    let baseline_accuracy = if svm_path.exists() {
        Some(read_svm(&svm_path)?.accuracy(&test_features)?)
    } else {
        None
    };
    let row = EvalRow {
        dataset: run.cfg.require_str("dataset.name")?.to_string(),
        accuracy: metrics.accuracy,
        avg_reward: metrics.avg_reward,
        avg_features_used: metrics.avg_features_used,
        baseline_accuracy,
    };
    write_csv(&run.output(EVAL_FILE), EVAL_HEADER, [row])?;
    run.finish()
}

pub fn cmd_baseline(opts: &RunOptions) -> Result<RunManifest> {
    let mut run = Run::start("baseline", opts)?;
    let svm_cfg = run.cfg.svm()?;
    let train_features = read_feature_cache(&run.input(TRAIN_CACHE_FILE))?;
    let test_features = read_feature_cache(&run.input(TEST_CACHE_FILE))?;
    let model = train_svm(&train_features, &svm_cfg)?;
    let row = BaselineRow {
        dataset: run.cfg.require_str("dataset.name")?.to_string(),
        svm_accuracy: model.accuracy(&test_features)?,
    };
    write_svm(&run.output(SVM_FILE), &model)?;
    write_csv(&run.output(BASELINE_FILE), BASELINE_HEADER, [row])?;
    run.finish()
}
