//! The two-level training loop.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::TrainConfig;
use super::metrics::{metric_columns, MetricRow, MetricsWriter, RunManifest, SubpolicyRow};
use crate::embedding::{collect_rollout_states, StateSet};
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::hierarchy::{
    derive_seed, ppo_update_master, ppo_update_subpolicy, HierAgent, MasterRecord, Regularizer, RegularizerSetup,
    RolloutBuffer, StepRecord,
};
use crate::neural::{Checkpoint, HeadKind};
use crate::ot::RandomFeatureMap;

// Tags for independent seed streams.
const TASK: u64 = 0x7a5c;
const AGENT: u64 = 0xa6e7;
const MAP: u64 = 0x3a9;
const UPDATE: u64 = 0x0bda;
const MASTER_RESET: u64 = 0x3e5e;

/// Action dimension seen by the feature map: one-hot width for discrete heads.
pub fn embedded_action_dim(head: HeadKind) -> usize {
    head.action_dim()
}

/// Seed of the task in force at `update`.
pub fn task_seed(config: &TrainConfig, update: usize) -> u64 {
    let base = derive_seed(config.seed, TASK);
    let every = config.task_resample_every;
    let last = if every > 0 { update / every * every } else { 0 };
    derive_seed(base, last as u64)
}

fn update_seed(config: &TrainConfig, update: usize) -> u64 {
    derive_seed(derive_seed(config.seed, UPDATE), update as u64)
}

fn sample_action(dist: &crate::neural::DistParams, rng: &mut ChaCha8Rng) -> Result<crate::neural::Action> {
    let normals: Vec<f64> = (0..dist.action_dim()).map(|_| rng.sample(StandardNormal)).collect();
    dist.sample(rng.random(), &normals)
}

/// Runs `episodes` whole episodes. The master picks a subpolicy every
/// `duration` steps; each decision collects the discounted reward of its tenure.
pub fn collect_rollouts(
    agent: &HierAgent,
    env: &mut dyn Env,
    episodes: usize,
    discount: f64,
    seed: u64,
) -> Result<RolloutBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = agent.config.subpolicy_duration;
    let mut buf = RolloutBuffer::new();
    for e in 0..episodes {
        let mut obs = env.reset(derive_seed(seed, e as u64));
        let mut active = 0;
        let mut tenure = 0;
        for t in 0..env.horizon() {
            let decision = t % duration == 0;
            if decision {
                let (dist, _) = agent.master.policy.forward(&obs)?;
                let choice = sample_action(&dist, &mut rng)?;
                active = choice.index().expect("master head is categorical");
                buf.push_decision(MasterRecord {
                    obs: obs.clone(),
                    choice: active,
                    log_prob: dist.log_prob(&choice)?,
                    value: agent.master.value.value(&obs)?,
                    reward: 0.0,
                    steps: 0,
                    done: false,
                });
                tenure = 0;
            }
            let sub = &agent.subpolicies[active];
            let (dist, _) = sub.policy.forward(&obs)?;
            let action = sample_action(&dist, &mut rng)?;
            let log_prob = dist.log_prob(&action)?;
            let value = sub.value.value(&obs)?;
            let step = env.step(&action)?;
            let done = step.done || t + 1 == env.horizon();
            if !step.reward.is_finite() {
                return Err(Error::NonFinite("environment reward".into()));
            }
            buf.credit_master(step.reward, discount.powi(tenure), done)?;
            tenure += 1;
            buf.push_step(StepRecord {
                obs,
                action,
                reward: step.reward,
                next_obs: step.observation.clone(),
                done,
                value,
                log_prob,
                subpolicy: active,
                decision,
            });
            obs = step.observation;
            if done {
                break;
            }
        }
    }
    Ok(buf)
}

/// One state set per update, shared by every pair: half from the first
/// half of the subpolicies' steps, half from the rest.
pub fn update_state_set(buf: &RolloutBuffer, k: usize, count: usize, seed: u64) -> Result<StateSet> {
    let split = k.div_ceil(2).max(1);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in &buf.steps {
        if s.subpolicy < split { a.push(s.obs.clone()) } else { b.push(s.obs.clone()) }
    }
    collect_rollout_states(&a, &b, count, (0, k.saturating_sub(1)), seed)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 }
}

/// Paths of a run's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub manifest: PathBuf,
    pub checkpoints: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            metrics: dir.join("metrics.csv"),
            manifest: dir.join("manifest.json"),
            checkpoints: dir.join("checkpoints"),
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_id: String,
    pub updates: usize,
    pub timesteps: u64,
    pub rows: Vec<MetricRow>,
    pub final_checkpoint: PathBuf,
    pub paths: RunPaths,
}

/// Training state that survives a checkpoint round trip.
pub struct Trainer {
    pub config: TrainConfig,
    pub agent: HierAgent,
    env: Box<dyn Env + Send>,
    map: RandomFeatureMap,
    pub update: usize,
    pub timestep: u64,
    /// Last update in which each subpolicy acted.
    last_selected: Vec<Option<usize>>,
    run_id: String,
    config_hash: String,
    paths: RunPaths,
    checkpoints: Vec<PathBuf>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let env = config.env.build(task_seed(&config, 0))?;
        let agent = HierAgent::new(env.obs_dim(), env.head(), config.agent.clone(), derive_seed(config.seed, AGENT))?;
        Self::assemble(config, agent, env, 0, 0, vec![None; 0])
    }

    fn assemble(
        config: TrainConfig,
        agent: HierAgent,
        env: Box<dyn Env + Send>,
        update: usize,
        timestep: u64,
        mut last_selected: Vec<Option<usize>>,
    ) -> Result<Self> {
        let map = RandomFeatureMap::new(
            embedded_action_dim(agent.head),
            config.embedding.features,
            config.embedding.bandwidth,
            derive_seed(config.seed, MAP),
        )?;
        last_selected.resize(agent.k(), None);
        let config_hash = config.hash()?;
        let run_id = config.run_id()?;
        let paths = RunPaths::new(&config.out_dir);
        Ok(Self { config, agent, env, map, update, timestep, last_selected, run_id, config_hash, paths, checkpoints: Vec::new() })
    }

    /// Continues a run from one of its checkpoints. The config must match the
    /// one that wrote it (output directory aside).
    pub fn resume(config: TrainConfig, checkpoint: &Path) -> Result<Self> {
        config.validate()?;
        let ck = Checkpoint::load(checkpoint)?;
        let run = &ck.manifest["run"];
        let hash = run["config_hash"].as_str().unwrap_or_default();
        if hash != config.hash()? {
            return Err(Error::Config("checkpoint was written under a different config".into()));
        }
        let update = run["update"].as_u64().ok_or_else(|| Error::Format("checkpoint lacks update".into()))? as usize;
        let timestep = run["timestep"].as_u64().ok_or_else(|| Error::Format("checkpoint lacks timestep".into()))?;
        let last_selected: Vec<Option<usize>> = serde_json::from_value(run["last_selected"].clone())?;
        let agent = HierAgent::from_checkpoint(&ck)?;
        let env = config.env.build(task_seed(&config, update))?;
        Self::assemble(config, agent, env, update, timestep, last_selected)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn paths(&self) -> &RunPaths {
        &self.paths
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    pub fn manifest(&self, status: &str) -> RunManifest {
        RunManifest {
            run_id: self.run_id.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.config.seed,
            code_version: env!("CARGO_PKG_VERSION").into(),
            command: "train".into(),
            env: self.config.env.clone(),
            metrics_columns: metric_columns(self.agent.k()),
            status: status.into(),
            updates: self.update,
            timesteps: self.timestep,
            checkpoints: self.checkpoints.clone(),
            summary: serde_json::Value::Null,
        }
    }

    fn checkpoint_of(&self, agent: &HierAgent) -> Checkpoint {
        agent.to_checkpoint(serde_json::json!({
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "update": self.update,
            "timestep": self.timestep,
            "last_selected": self.last_selected,
        }))
    }

    pub fn save_checkpoint(&mut self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.paths.checkpoints)?;
        let path = self.paths.checkpoints.join(name);
        self.checkpoint_of(&self.agent).save(&path)?;
        self.checkpoints.push(path.clone());
        Ok(path)
    }

    fn done(&self) -> bool {
        self.timestep >= self.config.total_timesteps
    }

    /// One update: rollouts, master update, then each subpolicy in index order.
    pub fn step_update(&mut self) -> Result<MetricRow> {
        let cfg = &self.config;
        let u = self.update;
        let seed = update_seed(cfg, u);
        let every = cfg.task_resample_every;
        if every > 0 && u > 0 && u % every == 0 {
            self.env.resample_task(task_seed(cfg, u));
            if cfg.reset_master_on_resample {
                self.agent.reset_master(derive_seed(derive_seed(cfg.seed, MASTER_RESET), u as u64));
            }
        }

        let mut buf = collect_rollouts(&self.agent, self.env.as_mut(), cfg.episodes_per_update, cfg.ppo.discount, derive_seed(seed, 1))?;
        buf.compute_advantages(cfg.ppo.discount, cfg.ppo.gae_lambda, cfg.ppo.discount)?;
        let returns = buf.episode_returns();
        let k = self.agent.k();
        for s in &buf.steps {
            self.last_selected[s.subpolicy] = Some(u);
        }

        let master = ppo_update_master(&mut self.agent, &buf, &cfg.ppo, derive_seed(seed, 2))?;

        let states = if cfg.regularizer && k >= 2 {
            update_state_set(&buf, k, cfg.embedding.states, derive_seed(seed, 3)).ok()
        } else {
            None
        };
        let setup = RegularizerSetup { map: self.map.clone(), ot: cfg.ot, embedding: cfg.embedding, seed: derive_seed(seed, 4) };

        let mut row = MetricRow {
            run_id: self.run_id.clone(),
            update: u,
            timestep: self.timestep + buf.steps.len() as u64,
            episodes: returns.len(),
            avg_return: mean(&returns),
            task: self.env.task_id(),
            master_policy_loss: master.skipped.is_none().then_some(master.policy_loss),
            master_value_loss: master.skipped.is_none().then_some(master.value_loss),
            master_entropy: master.skipped.is_none().then_some(master.entropy),
            subpolicies: Vec::with_capacity(k),
            wd: vec![vec![None; k]; k],
            wd_min: vec![None; k],
            clamp_events: 0,
        };
        for i in 0..k {
            let recent = self.last_selected[i].is_some_and(|last| u - last <= cfg.recent_window);
            let reg = match (&states, recent) {
                (Some(states), true) => Some(Regularizer { setup: &setup, states }),
                _ => None,
            };
            let s = ppo_update_subpolicy(i, &mut self.agent, &buf, &cfg.ppo, reg, cfg.agent.alpha, derive_seed(seed, 10 + i as u64))?;
            let ran = s.skipped.is_none();
            row.subpolicies.push(SubpolicyRow {
                samples: s.samples,
                policy_loss: ran.then_some(s.policy_loss),
                value_loss: ran.then_some(s.value_loss),
                entropy: ran.then_some(s.entropy),
            });
            for (j, v) in &s.wd_pairs {
                row.wd[i][*j] = Some(*v);
            }
            row.wd_min[i] = s.wd_min;
            row.clamp_events += s.clamp_events;
        }
        if !row.avg_return.is_finite() {
            return Err(Error::NonFinite("average return".into()));
        }
        self.timestep = row.timestep;
        self.update += 1;
        Ok(row)
    }

    /// Trains until the timestep budget (or `max_updates` more updates) is
    /// spent, appending to the run's metrics file.
    pub fn run(&mut self, max_updates: Option<usize>) -> Result<RunSummary> {
        std::fs::create_dir_all(&self.paths.dir)?;
        let mut writer = MetricsWriter::open(&self.paths.metrics, self.agent.k())?;
        if self.update == 0 && self.timestep == 0 {
            self.save_checkpoint("update_000000.ckpt")?;
        }
        self.manifest("running").save(&self.paths.manifest)?;
        let mut rows = Vec::new();
        let stop = max_updates.map(|m| self.update + m);
        while !self.done() && stop.is_none_or(|s| self.update < s) {
            let snapshot = self.agent.clone();
            let (update, timestep) = (self.update, self.timestep);
            match self.step_update() {
                Ok(row) => {
                    writer.write(&row)?;
                    rows.push(row);
                }
                Err(e @ Error::NonFinite(_)) => {
                    self.agent = snapshot;
                    self.update = update;
                    self.timestep = timestep;
                    self.save_checkpoint("last_good.ckpt")?;
                    self.manifest("aborted").save(&self.paths.manifest)?;
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
            if self.config.checkpoint_every > 0 && self.update % self.config.checkpoint_every == 0 {
                self.save_checkpoint(&format!("update_{:06}.ckpt", self.update))?;
            }
        }
        let final_checkpoint = self.save_checkpoint("final.ckpt")?;
        self.manifest(if self.done() { "complete" } else { "paused" }).save(&self.paths.manifest)?;
        Ok(RunSummary {
            run_id: self.run_id.clone(),
            updates: self.update,
            timesteps: self.timestep,
            rows,
            final_checkpoint,
            paths: self.paths.clone(),
        })
    }
}

/// Trains a fresh agent per `config`.
pub fn train(config: &TrainConfig) -> Result<RunSummary> {
    Trainer::new(config.clone())?.run(None)
}
