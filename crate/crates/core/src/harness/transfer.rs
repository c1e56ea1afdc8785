//! Master-only adaptation with frozen subpolicies.

use std::path::Path;

use serde::Serialize;

use super::config::TrainConfig;
use super::metrics::{metric_columns, MetricRow, MetricsWriter, RunManifest, SubpolicyRow};
use super::train::{collect_rollouts, task_seed, RunPaths};
use crate::error::{Error, Result};
use crate::hierarchy::{derive_seed, ppo_update_master, ppo_update_subpolicy, HierAgent};
use crate::neural::Checkpoint;

const TRANSFER_TASK: u64 = 0x7ea5;
const TRANSFER_MASTER: u64 = 0x3a57;
const TRANSFER_UPDATE: u64 = 0x0bd7;

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub run_id: String,
    pub task: usize,
    /// Average return per adaptation update.
    pub curve: Vec<f64>,
    /// Mean of the last `window` entries of the curve.
    pub plateau: f64,
    /// First update whose trailing mean covers `plateau_fraction` of the way
    /// from the first update's return to the plateau.
    pub updates_to_plateau: usize,
}

/// Trailing mean of `curve` over `window` entries, at every index.
pub fn running_mean(curve: &[f64], window: usize) -> Vec<f64> {
    (0..curve.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            curve[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Updates needed before the running mean gets `fraction` of the way from
/// the starting return to the plateau. Zero when the curve never improves.
pub fn updates_to_plateau(curve: &[f64], window: usize, fraction: f64) -> (f64, usize) {
    if curve.is_empty() {
        return (0.0, 0);
    }
    let tail = &curve[curve.len().saturating_sub(window)..];
    let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
    let start = curve[0];
    if plateau <= start {
        return (plateau, 0);
    }
    let threshold = start + fraction * (plateau - start);
    let smooth = running_mean(curve, window);
    let hit = smooth.iter().position(|&v| v >= threshold).unwrap_or(curve.len() - 1);
    (plateau, hit)
}

/// Loads subpolicies from `checkpoint`, draws a task (a new one unless
/// `transfer.same_task`), reinitializes the master, and trains only the
/// master for `transfer.updates` updates. Writes metrics and a manifest to
/// `config.out_dir`.
pub fn transfer_eval(checkpoint: &Path, config: &TrainConfig) -> Result<TransferReport> {
    config.validate()?;
    let ck = Checkpoint::load(checkpoint)?;
    let mut agent = HierAgent::from_checkpoint(&ck)?;
    if agent.k() != config.agent.k {
        return Err(Error::Config(format!(
            "checkpoint has {} subpolicies, config asks for {}",
            agent.k(),
            config.agent.k
        )));
    }
    let trained_update = ck.manifest["run"]["update"].as_u64().unwrap_or(0) as usize;
    let seed = if config.transfer.same_task {
        task_seed(config, trained_update)
    } else {
        derive_seed(config.seed, TRANSFER_TASK)
    };
    let mut env = config.env.build(seed)?;
    if env.obs_dim() != agent.obs_dim || env.head() != agent.head {
        return Err(Error::Config("checkpoint agent does not fit the configured environment".into()));
    }
    agent.reset_master(derive_seed(config.seed, TRANSFER_MASTER));
    let frozen: Vec<Vec<f64>> = agent.subpolicies.iter().map(|s| s.policy.params().to_vec()).collect();

    let paths = RunPaths::new(&config.out_dir);
    std::fs::create_dir_all(&paths.dir)?;
    let run_id = config.run_id()?;
    let k = agent.k();
    let mut writer = MetricsWriter::open(&paths.metrics, k)?;
    let mut curve = Vec::with_capacity(config.transfer.updates);
    let mut timestep = 0u64;
    for u in 0..config.transfer.updates {
        let useed = derive_seed(derive_seed(config.seed, TRANSFER_UPDATE), u as u64);
        let mut buf = collect_rollouts(&agent, env.as_mut(), config.episodes_per_update, config.ppo.discount, derive_seed(useed, 1))?;
        buf.compute_advantages(config.ppo.discount, config.ppo.gae_lambda, config.ppo.discount)?;
        let returns = buf.episode_returns();
        let m = ppo_update_master(&mut agent, &buf, &config.ppo, derive_seed(useed, 2))?;
        let mut subs = vec![SubpolicyRow::default(); k];
        for s in &buf.steps {
            subs[s.subpolicy].samples += 1;
        }
        if !config.transfer.freeze_subpolicies {
            for (i, row) in subs.iter_mut().enumerate() {
                let s = ppo_update_subpolicy(i, &mut agent, &buf, &config.ppo, None, 0.0, derive_seed(useed, 10 + i as u64))?;
                if s.skipped.is_none() {
                    row.policy_loss = Some(s.policy_loss);
                    row.value_loss = Some(s.value_loss);
                    row.entropy = Some(s.entropy);
                }
            }
        }
        let avg = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
        if !avg.is_finite() || !m.policy_loss.is_finite() {
            return Err(Error::NonFinite("transfer update".into()));
        }
        timestep += buf.steps.len() as u64;
        writer.write(&MetricRow {
            run_id: run_id.clone(),
            update: u,
            timestep,
            episodes: returns.len(),
            avg_return: avg,
            task: env.task_id(),
            master_policy_loss: Some(m.policy_loss),
            master_value_loss: Some(m.value_loss),
            master_entropy: Some(m.entropy),
            subpolicies: subs,
            wd: vec![vec![None; k]; k],
            wd_min: vec![None; k],
            clamp_events: 0,
        })?;
        curve.push(avg);
    }
    if config.transfer.freeze_subpolicies {
        debug_assert!(agent.subpolicies.iter().zip(&frozen).all(|(s, f)| s.policy.params() == f.as_slice()));
    }
    let (plateau, hit) = updates_to_plateau(&curve, config.transfer.window, config.transfer.plateau_fraction);
    let report = TransferReport { run_id: run_id.clone(), task: env.task_id(), curve, plateau, updates_to_plateau: hit };

    let ck_path = paths.checkpoints.join("adapted.ckpt");
    std::fs::create_dir_all(&paths.checkpoints)?;
    agent.to_checkpoint(serde_json::json!({ "run_id": run_id, "source": checkpoint })).save(&ck_path)?;
    RunManifest {
        run_id,
        config_hash: config.hash()?,
        seed: config.seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        command: "transfer-eval".into(),
        env: config.env.clone(),
        metrics_columns: metric_columns(k),
        status: "complete".into(),
        updates: config.transfer.updates,
        timesteps: timestep,
        checkpoints: vec![ck_path],
        summary: serde_json::json!({
            "source_checkpoint": checkpoint,
            "task": report.task,
            "plateau": report.plateau,
            "updates_to_plateau": report.updates_to_plateau,
        }),
    }
    .save(&paths.manifest)?;
    Ok(report)
}
