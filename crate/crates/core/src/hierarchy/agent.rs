use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Checkpoint, HeadKind, OptState, PolicyNet, ValueNet};

/// Network and optimizer settings shared by the master and subpolicies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Number of subpolicies.
    pub k: usize,
    /// Regularizer coefficient.
    pub alpha: f64,
    /// Environment steps per master decision.
    pub subpolicy_duration: usize,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub master_lr: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            k: 2,
            alpha: 0.5,
            subpolicy_duration: 10,
            hidden: vec![64, 64],
            init_log_std: -0.5,
            policy_lr: 3e-4,
            value_lr: 1e-3,
            master_lr: 1e-3,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("need at least one subpolicy".into()));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.alpha > 0.0 && self.k < 2 {
            return Err(Error::Config("alpha > 0 needs k >= 2".into()));
        }
        if self.subpolicy_duration == 0 {
            return Err(Error::Config("subpolicy duration must be >= 1".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer sizes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Actor, critic, and their optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub policy_opt: OptState,
    pub value_opt: OptState,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, head: HeadKind, cfg: &AgentConfig, policy_lr: f64, seed: u64) -> Self {
        let policy = PolicyNet::new(obs_dim, &cfg.hidden, head, cfg.init_log_std, seed);
        let value = ValueNet::new(obs_dim, &cfg.hidden, seed ^ 0x5bd1_e995);
        let policy_opt = OptState::new(policy.param_count(), policy_lr);
        let value_opt = OptState::new(value.params().len(), cfg.value_lr);
        Self { policy, value, policy_opt, value_opt }
    }
}

/// Master policy over `k` subpolicies plus the subpolicies themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct HierAgent {
    pub master: ActorCritic,
    pub subpolicies: Vec<ActorCritic>,
    pub config: AgentConfig,
    pub obs_dim: usize,
    pub head: HeadKind,
    pub seed: u64,
}

/// Derives an independent child seed from `seed` and `tag`.
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl HierAgent {
    pub fn new(obs_dim: usize, head: HeadKind, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let master = Self::fresh_master(obs_dim, &config, derive_seed(seed, 1));
        let subpolicies = (0..config.k)
            .map(|k| ActorCritic::new(obs_dim, head, &config, config.policy_lr, derive_seed(seed, 100 + k as u64)))
            .collect();
        Ok(Self { master, subpolicies, config, obs_dim, head, seed })
    }

    fn fresh_master(obs_dim: usize, config: &AgentConfig, seed: u64) -> ActorCritic {
        ActorCritic::new(obs_dim, HeadKind::Categorical { actions: config.k }, config, config.master_lr, seed)
    }

    /// Replaces the master with freshly initialized networks.
    pub fn reset_master(&mut self, seed: u64) {
        self.master = Self::fresh_master(self.obs_dim, &self.config, seed);
    }

    pub fn k(&self) -> usize {
        self.subpolicies.len()
    }

    pub fn to_checkpoint(&self, manifest: serde_json::Value) -> Checkpoint {
        let mut ck = Checkpoint::new(
            self.seed,
            serde_json::json!({
                "agent": {
                    "k": self.k(),
                    "obs_dim": self.obs_dim,
                    "head": self.head,
                    "config": self.config,
                },
                "run": manifest,
            }),
        );
        push_actor_critic(&mut ck, "master", &self.master);
        for (k, sub) in self.subpolicies.iter().enumerate() {
            push_actor_critic(&mut ck, &format!("sub{k}"), sub);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let agent = &ck.manifest["agent"];
        let config: AgentConfig = serde_json::from_value(agent["config"].clone())?;
        let head: HeadKind = serde_json::from_value(agent["head"].clone())?;
        let obs_dim = agent["obs_dim"]
            .as_u64()
            .ok_or_else(|| Error::Format("checkpoint manifest lacks obs_dim".into()))? as usize;
        let k = agent["k"].as_u64().ok_or_else(|| Error::Format("checkpoint manifest lacks k".into()))? as usize;
        let master = read_actor_critic(ck, "master")?;
        let subpolicies = (0..k).map(|i| read_actor_critic(ck, &format!("sub{i}"))).collect::<Result<Vec<_>>>()?;
        Ok(Self { master, subpolicies, config, obs_dim, head, seed: ck.seed })
    }
}

fn push_opt(ck: &mut Checkpoint, name: &str, opt: &OptState) {
    ck.push_array(&format!("{name}.m"), "optimizer", opt.m.clone());
    ck.push_array(&format!("{name}.v"), "optimizer", opt.v.clone());
    ck.push_array(
        &format!("{name}.meta"),
        "optimizer",
        vec![opt.step as f64, opt.lr, opt.beta1, opt.beta2, opt.eps],
    );
}

fn read_opt(ck: &Checkpoint, name: &str) -> Result<OptState> {
    let meta = ck.array(&format!("{name}.meta"))?;
    if meta.len() != 5 {
        return Err(Error::Format(format!("{name}.meta has {} entries", meta.len())));
    }
    Ok(OptState {
        m: ck.array(&format!("{name}.m"))?.to_vec(),
        v: ck.array(&format!("{name}.v"))?.to_vec(),
        step: meta[0] as u64,
        lr: meta[1],
        beta1: meta[2],
        beta2: meta[3],
        eps: meta[4],
    })
}

fn push_actor_critic(ck: &mut Checkpoint, name: &str, ac: &ActorCritic) {
    ck.push_policy(&format!("{name}.policy"), &ac.policy);
    ck.push_value(&format!("{name}.value"), &ac.value);
    push_opt(ck, &format!("{name}.policy_opt"), &ac.policy_opt);
    push_opt(ck, &format!("{name}.value_opt"), &ac.value_opt);
}

fn read_actor_critic(ck: &Checkpoint, name: &str) -> Result<ActorCritic> {
    Ok(ActorCritic {
        policy: ck.policy(&format!("{name}.policy"))?,
        value: ck.value(&format!("{name}.value"))?,
        policy_opt: read_opt(ck, &format!("{name}.policy_opt"))?,
        value_opt: read_opt(ck, &format!("{name}.value_opt"))?,
    })
}
