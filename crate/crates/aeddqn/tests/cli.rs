mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use aeddqn::commands::{
    cmd_baseline, cmd_encode, cmd_eval, cmd_train_ae, cmd_train_agent, RunOptions, BASELINE_FILE,
    EVAL_FILE, LOSS_FILE, METRICS_FILE, TEST_CACHE_FILE, TRAIN_CACHE_FILE,
};
use aeddqn::formats::read_feature_cache;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn fixture(extra: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let train = common::synthetic_idx(&root, "train", 120, 1);
    let test = common::synthetic_idx(&root, "test", 40, 2);
    let config = root.join("run.cfg");
    std::fs::write(
        &config,
        format!(
            "# tiny pipeline\ndataset.name = mnist\ndataset.train_path = {}\ndataset.test_path = {}\n\
             ae.latent_dim = 8\nae.epochs = 2\nae.batch = 16\n\
             agent.train_episodes = 60\nagent.batch_episodes = 4\nagent.sync_period = 10\nagent.hidden = 16\n{extra}",
            train.display(),
            test.display()
        ),
    )
    .unwrap();
    Fixture {
        _dir: dir,
        root,
        config,
    }
}

fn opts(f: &Fixture, out: &str) -> RunOptions {
    RunOptions {
        config: f.config.clone(),
        seed: None,
        out_dir: f.root.join(out),
    }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn pipeline(o: &RunOptions) {
    cmd_train_ae(o).unwrap();
    cmd_encode(o).unwrap();
    cmd_baseline(o).unwrap();
    cmd_train_agent(o).unwrap();
    cmd_eval(o).unwrap();
}

#[test]
fn full_pipeline_is_reproducible() {
    let f = fixture("");
    let (a, b) = (opts(&f, "a"), opts(&f, "b"));
    pipeline(&a);
    pipeline(&b);
    for name in [LOSS_FILE, METRICS_FILE, EVAL_FILE, BASELINE_FILE] {
        assert_eq!(
            read(&a.out_dir, name),
            read(&b.out_dir, name),
            "{name} differs"
        );
    }
    for name in ["ae_encoder.net", "qnet.net", "svm.model", TRAIN_CACHE_FILE] {
        assert_eq!(
            std::fs::read(a.out_dir.join(name)).unwrap(),
            std::fs::read(b.out_dir.join(name)).unwrap()
        );
    }

    let loss = read(&a.out_dir, LOSS_FILE);
    assert!(loss.starts_with("epoch,mse\n"));
    assert_eq!(loss.lines().count(), 3);

    let train = read_feature_cache(&a.out_dir.join(TRAIN_CACHE_FILE)).unwrap();
    assert_eq!((train.len(), train.dim()), (120, 8));
    assert_eq!(
        read_feature_cache(&a.out_dir.join(TEST_CACHE_FILE))
            .unwrap()
            .len(),
        40
    );

    let metrics = read(&a.out_dir, METRICS_FILE);
    assert!(metrics
        .starts_with("episode,epsilon,loss,eval_accuracy,eval_avg_reward,eval_avg_features\n"));

    let eval = read(&a.out_dir, EVAL_FILE);
    let mut lines = eval.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dataset,accuracy,avg_reward,avg_features_used,baseline_accuracy"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    assert_eq!(row[0], "mnist");
    let acc: f64 = row[1].parse().unwrap();
    let reward: f64 = row[2].parse().unwrap();
    let feats: f64 = row[3].parse().unwrap();
    assert!((reward - (-0.005 * feats + acc - (1.0 - acc))).abs() < 1e-9);
    let baseline: f64 = row[4].parse().unwrap();
    let svm_row = read(&a.out_dir, BASELINE_FILE);
    assert!(svm_row.starts_with("dataset,svm_accuracy\nmnist,"));
    assert!(baseline > 0.0 && baseline <= 1.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&a.out_dir, "manifest_train_agent.json")).unwrap();
    assert_eq!(manifest["command"], "train-agent");
    assert_eq!(manifest["config"]["agent.train_episodes"], "60");
    assert_eq!(manifest["config"]["agent.gamma"], "0.99");
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_changes_results() {
    let f = fixture("");
    let a = opts(&f, "a");
    let b = RunOptions {
        seed: Some(99),
        ..opts(&f, "b")
    };
    cmd_train_ae(&a).unwrap();
    cmd_train_ae(&b).unwrap();
    assert_ne!(read(&a.out_dir, LOSS_FILE), read(&b.out_dir, LOSS_FILE));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&b.out_dir, "manifest_train_ae.json")).unwrap();
    assert_eq!(manifest["seed"], 99);
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_aeddqn"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn binary_reports_missing_dataset_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "ae.epochs = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = binary(&[
        "train-ae",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dataset.train_path"));
    assert!(!out_dir.join(LOSS_FILE).exists());
}

#[test]
fn binary_rejects_unknown_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "agent.gama = 0.5\n").unwrap();
    let out = binary(&["eval", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("agent.gama"));
}

#[test]
fn binary_encode_needs_model_and_rejects_corruption() {
    let f = fixture("");
    let out_dir = f.root.join("out");
    let args = |cmd: &'static str| {
        vec![
            cmd.to_string(),
            "--config".into(),
            f.config.display().to_string(),
            "--out-dir".into(),
            out_dir.display().to_string(),
        ]
    };
    let run = |cmd| {
        let a = args(cmd);
        binary(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert!(!run("encode").status.success());
    let ok = run("train-ae");
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    std::fs::write(out_dir.join("ae_encoder.net"), b"AEDQNET1\x01\x02").unwrap();
    let bad = run("encode");
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("truncated"));
    assert!(!out_dir.join(TRAIN_CACHE_FILE).exists());
}

#[test]
fn latent_mismatch_is_reported() {
    let f = fixture("");
    let o = opts(&f, "out");
    cmd_train_ae(&o).unwrap();
    let text = std::fs::read_to_string(&f.config)
        .unwrap()
        .replace("ae.latent_dim = 8", "ae.latent_dim = 9");
    std::fs::write(&f.config, text).unwrap();
    let err = cmd_encode(&o).unwrap_err();
    assert!(err.to_string().contains("ae.latent_dim"));
}
