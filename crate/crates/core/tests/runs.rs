use std::path::Path;
use std::process::Command;

use wder::harness::{train, transfer_eval, MetricsTable, RunManifest, TrainConfig, Trainer};
use wder::hierarchy::HierAgent;
use wder::neural::Checkpoint;

fn small(dir: &Path, steps: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.total_timesteps = steps;
    cfg.seed = 3;
    cfg.checkpoint_every = 2;
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn agent_at(path: &Path) -> HierAgent {
    HierAgent::from_checkpoint(&Checkpoint::load(path).unwrap()).unwrap()
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = train(&small(&tmp.path().join("whole"), 4000)).unwrap();

    let cfg = small(&tmp.path().join("split"), 4000);
    let first = Trainer::new(cfg.clone()).unwrap().run(Some(4)).unwrap();
    assert!(first.timesteps < 4000);
    let ckpt = first.paths.checkpoints.join("update_000004.ckpt");
    let rest = Trainer::resume(cfg, &ckpt).unwrap().run(None).unwrap();
    assert_eq!(rest.timesteps, whole.timesteps);

    let a = std::fs::read_to_string(&whole.paths.metrics).unwrap();
    let b = std::fs::read_to_string(&rest.paths.metrics).unwrap();
    assert_eq!(a, b);
    assert_eq!(agent_at(&whole.final_checkpoint), agent_at(&rest.final_checkpoint));
}

#[test]
fn resume_rejects_a_different_config() {
    let tmp = tempfile::tempdir().unwrap();
    let run = train(&small(tmp.path(), 1000)).unwrap();
    let mut other = small(tmp.path(), 1000);
    other.agent.alpha = 0.3;
    assert_eq!(Trainer::resume(other, &run.final_checkpoint).err().unwrap().kind(), "config");
}

#[test]
fn zero_budget_writes_only_the_initial_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let run = train(&small(tmp.path(), 0)).unwrap();
    assert_eq!(run.updates, 0);
    assert!(run.rows.is_empty());
    let table = MetricsTable::read(&run.paths.metrics).unwrap();
    assert!(table.rows.is_empty());
    let manifest = RunManifest::load(&run.paths.manifest).unwrap();
    assert_eq!(manifest.status, "complete");
    assert_eq!(agent_at(&run.paths.checkpoints.join("update_000000.ckpt")), agent_at(&run.final_checkpoint));
}

#[test]
fn outputs_follow_the_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let run = train(&small(tmp.path(), 2000)).unwrap();
    let manifest = RunManifest::load(&run.paths.manifest).unwrap();
    let table = MetricsTable::read(&run.paths.metrics).unwrap();
    assert_eq!(table.columns, manifest.metrics_columns);
    assert_eq!(table.rows.len(), run.updates);
    assert_eq!(manifest.run_id, run.run_id);
    let steps = table.values("timestep").unwrap();
    assert!(steps.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*steps.last().unwrap() as u64, run.timesteps);
}

#[test]
fn frozen_transfer_leaves_subpolicies_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let run = train(&small(&tmp.path().join("train"), 3000)).unwrap();
    let mut cfg = small(&tmp.path().join("adapt"), 3000);
    cfg.transfer.updates = 4;
    let report = transfer_eval(&run.final_checkpoint, &cfg).unwrap();
    assert_eq!(report.curve.len(), 4);
    let before = agent_at(&run.final_checkpoint);
    let after = agent_at(&tmp.path().join("adapt/checkpoints/adapted.ckpt"));
    for (b, a) in before.subpolicies.iter().zip(&after.subpolicies) {
        assert_eq!(b.policy.params(), a.policy.params());
    }
    assert_ne!(before.master.policy.params(), after.master.policy.params());
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mb = TrainConfig::load(&root.join("movement_bandits.toml")).unwrap();
    let mut defaults = TrainConfig::default();
    defaults.out_dir = mb.out_dir.clone();
    assert_eq!(mb, defaults);
    let pr = TrainConfig::load(&root.join("point_reach.toml")).unwrap();
    assert_eq!(pr.env.name(), "point_reach");
}

fn wder(args: &[&str]) -> (bool, serde_json::Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_wder")).args(args).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    (out.status.success(), serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}")))
}

#[test]
fn cli_reports_errors_as_json() {
    let (ok, v) = wder(&["train", "--env", "nowhere"]);
    assert!(!ok);
    assert_eq!(v["error"], "config");
    let (ok, v) = wder(&["fig2", "--thetas=-1", "--out-dir", std::env::temp_dir().join("wder-fig2-neg").to_str().unwrap()]);
    assert!(!ok);
    assert_eq!(v["error"], "domain");
    let (ok, v) = wder(&["train", "--no-such-flag"]);
    assert!(!ok);
    assert_eq!(v["error"], "usage");
}

#[test]
fn cli_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cli");
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/point_reach.toml");
    let (ok, v) = wder(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--alpha",
        "0.2",
        "--out-dir",
        dir.to_str().unwrap(),
        "--max-updates",
        "1",
    ]);
    assert!(ok, "{v}");
    assert_eq!(v["updates"], 1);
    let manifest = RunManifest::load(&dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.seed, 9);
    assert_eq!(manifest.env.name(), "point_reach");
    assert_eq!(manifest.status, "paused");
    let ck = Checkpoint::load(&dir.join("checkpoints/final.ckpt")).unwrap();
    assert_eq!(HierAgent::from_checkpoint(&ck).unwrap().config.alpha, 0.2);
}
