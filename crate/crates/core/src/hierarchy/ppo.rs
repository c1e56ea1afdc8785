//! Clipped-surrogate updates for subpolicies (with the diversity term) and
//! for the master.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{ActorCritic, HierAgent};
use super::buffer::RolloutBuffer;
use super::wder::{wd_min, wder_gradient, RegularizerSetup};
use crate::embedding::StateSet;
use crate::error::{Error, Result};
use crate::neural::{clip_grad_norm, opt_step, Action, DistGrad};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoParams {
    pub epochs: usize,
    pub clip: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub minibatch: usize,
    pub max_grad_norm: f64,
    /// Standardize advantages over the batch (skipped for a single sample).
    pub normalize_advantages: bool,
}

impl Default for PpoParams {
    fn default() -> Self {
        Self {
            epochs: 4,
            clip: 0.2,
            discount: 0.99,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            minibatch: 256,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

impl PpoParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::Config("epochs and minibatch must be >= 1".into()));
        }
        if !(self.clip > 0.0) || !(0.0..=1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("clip must be > 0; discount and gae_lambda in [0, 1]".into()));
        }
        if self.entropy_coef < 0.0 || !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("entropy_coef must be >= 0 and max_grad_norm > 0".into()));
        }
        Ok(())
    }
}

/// Diversity term inputs for one subpolicy update.
#[derive(Debug, Clone, Copy)]
pub struct Regularizer<'a> {
    pub setup: &'a RegularizerSetup,
    pub states: &'a StateSet,
}

/// Diagnostics from one update. Loss fields are means over minibatch steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    pub samples: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub wd_min: Option<f64>,
    pub wd_argmin: Option<usize>,
    /// Per-pair estimates `(j, value)` computed for the regularizer.
    pub wd_pairs: Vec<(usize, f64)>,
    pub clamp_events: usize,
    /// Why the surrogate part was skipped, if it was.
    pub skipped: Option<String>,
}

struct Batch<'a> {
    obs: Vec<&'a [f64]>,
    actions: Vec<&'a Action>,
    old_log_prob: Vec<f64>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

fn normalized(adv: Vec<f64>, enabled: bool) -> Vec<f64> {
    let n = adv.len();
    if !enabled || n < 2 {
        return adv;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std < 1e-8 {
        return adv;
    }
    adv.into_iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

struct Surrogate {
    grads: Vec<f64>,
    loss: f64,
    entropy: f64,
    clipped: usize,
}

fn surrogate_grad(ac: &ActorCritic, batch: &Batch, idx: &[usize], ppo: &PpoParams) -> Result<Surrogate> {
    let policy = &ac.policy;
    let mut grads = vec![0.0; policy.param_count()];
    let scale = 1.0 / idx.len() as f64;
    let (mut loss, mut entropy, mut clipped) = (0.0, 0.0, 0);
    for &i in idx {
        let (dist, cache) = policy.forward(batch.obs[i])?;
        let logp = dist.log_prob(batch.actions[i])?;
        let adv = batch.advantages[i];
        let ratio = (logp - batch.old_log_prob[i]).exp();
        let unclipped = ratio * adv;
        let bounded = ratio.clamp(1.0 - ppo.clip, 1.0 + ppo.clip) * adv;
        let h = dist.entropy();
        loss += (-unclipped.min(bounded) - ppo.entropy_coef * h) * scale;
        entropy += h * scale;
        let active = if adv >= 0.0 { ratio <= 1.0 + ppo.clip } else { ratio >= 1.0 - ppo.clip };
        if !active {
            clipped += 1;
        }
        let d_logp = if active { -ratio * adv * scale } else { 0.0 };
        let mut head = dist.log_prob_grad(batch.actions[i])?;
        match &mut head {
            DistGrad::Categorical { d_logits } => d_logits.iter_mut().for_each(|g| *g *= d_logp),
            DistGrad::Gaussian { d_mean, d_log_std } => {
                d_mean.iter_mut().for_each(|g| *g *= d_logp);
                d_log_std.iter_mut().for_each(|g| *g *= d_logp);
            }
        }
        if ppo.entropy_coef != 0.0 {
            head.add_scaled(&dist.entropy_grad(), -ppo.entropy_coef * scale);
        }
        policy.backward_into(&cache, &head, &mut grads)?;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("surrogate loss".into()));
    }
    Ok(Surrogate { grads, loss, entropy, clipped })
}

fn value_step(ac: &mut ActorCritic, batch: &Batch, idx: &[usize], ppo: &PpoParams) -> Result<f64> {
    let mut grads = vec![0.0; ac.value.params().len()];
    let scale = 1.0 / idx.len() as f64;
    let mut loss = 0.0;
    for &i in idx {
        let (v, cache) = ac.value.forward(batch.obs[i])?;
        let err = v - batch.returns[i];
        loss += 0.5 * err * err * scale;
        ac.value.backward_into(&cache, err * scale, &mut grads)?;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("value loss".into()));
    }
    clip_grad_norm(&mut grads, ppo.max_grad_norm);
    opt_step(ac.value.params_mut(), &grads, &mut ac.value_opt)?;
    Ok(loss)
}

fn apply_policy_grads(ac: &mut ActorCritic, mut grads: Vec<f64>, ppo: &PpoParams) -> Result<()> {
    clip_grad_norm(&mut grads, ppo.max_grad_norm);
    let mut params = ac.policy.params().to_vec();
    opt_step(&mut params, &grads, &mut ac.policy_opt)?;
    ac.policy.params_mut().copy_from_slice(&params);
    Ok(())
}

fn minibatches(n: usize, ppo: &PpoParams, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(ppo.minibatch).map(|c| c.to_vec()).collect()
}

/// Updates subpolicy `k` on its own steps, minimizing the surrogate loss
/// minus `alpha` times its minimum distance to the other subpolicies.
///
/// The distance potentials are fit once, before the epoch loop. With
/// `alpha == 0` the distance is still estimated for telemetry when a
/// regularizer is given, but it never touches the parameters. With no
/// regularizer the distance is not computed at all. If `k` took no steps the
/// surrogate is skipped; the diversity term still applies when states are given.
pub fn ppo_update_subpolicy(
    k: usize,
    agent: &mut HierAgent,
    buffer: &RolloutBuffer,
    ppo: &PpoParams,
    regularizer: Option<Regularizer>,
    alpha: f64,
    seed: u64,
) -> Result<UpdateStats> {
    ppo.validate()?;
    if k >= agent.k() {
        return Err(Error::Config(format!("subpolicy {k} out of range 0..{}", agent.k())));
    }
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
    }
    if buffer.advantages.len() != buffer.steps.len() {
        return Err(Error::Usage("compute advantages before updating".into()));
    }
    let mut stats = UpdateStats::default();

    let cache = match regularizer {
        Some(reg) => {
            let est = wd_min(k, agent, reg.states, reg.setup)?;
            stats.wd_min = Some(est.value);
            stats.wd_argmin = Some(est.argmin);
            stats.wd_pairs = est.pairs.iter().map(|p| (p.j, p.value)).collect();
            stats.clamp_events = est.pairs.iter().map(|p| p.potentials.clamp_events).sum();
            (alpha > 0.0).then_some(est.cache)
        }
        None => None,
    };

    let idx = buffer.indices_for(k);
    stats.samples = idx.len();
    let batch = Batch {
        obs: idx.iter().map(|&i| buffer.steps[i].obs.as_slice()).collect(),
        actions: idx.iter().map(|&i| &buffer.steps[i].action).collect(),
        old_log_prob: idx.iter().map(|&i| buffer.steps[i].log_prob).collect(),
        advantages: normalized(idx.iter().map(|&i| buffer.advantages[i]).collect(), ppo.normalize_advantages),
        returns: idx.iter().map(|&i| buffer.returns[i]).collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if idx.is_empty() {
        stats.skipped = Some(format!("subpolicy {k} took no steps"));
        if let Some(cache) = &cache {
            for _ in 0..ppo.epochs {
                let g = wder_gradient(agent, cache, alpha)?;
                apply_policy_grads(&mut agent.subpolicies[k], g, ppo)?;
            }
        }
        return Ok(stats);
    }

    let mut steps = 0usize;
    let mut clipped = 0usize;
    for _ in 0..ppo.epochs {
        for mb in minibatches(idx.len(), ppo, &mut rng) {
            let mut sur = surrogate_grad(&agent.subpolicies[k], &batch, &mb, ppo)?;
            if let Some(cache) = &cache {
                let g = wder_gradient(agent, cache, alpha)?;
                sur.grads.iter_mut().zip(&g).for_each(|(s, w)| *s += w);
            }
            let ac = &mut agent.subpolicies[k];
            apply_policy_grads(ac, sur.grads, ppo)?;
            stats.value_loss += value_step(ac, &batch, &mb, ppo)?;
            stats.policy_loss += sur.loss;
            stats.entropy += sur.entropy;
            clipped += sur.clipped;
            steps += 1;
        }
    }
    stats.policy_loss /= steps as f64;
    stats.value_loss /= steps as f64;
    stats.entropy /= steps as f64;
    stats.clip_fraction = clipped as f64 / (ppo.epochs * idx.len()) as f64;
    Ok(stats)
}

/// Updates the master on its decision records. There is no diversity term.
pub fn ppo_update_master(agent: &mut HierAgent, buffer: &RolloutBuffer, ppo: &PpoParams, seed: u64) -> Result<UpdateStats> {
    ppo.validate()?;
    if buffer.master_advantages.len() != buffer.master.len() {
        return Err(Error::Usage("compute advantages before updating".into()));
    }
    let mut stats = UpdateStats { samples: buffer.master.len(), ..Default::default() };
    if buffer.master.is_empty() {
        stats.skipped = Some("no master decisions recorded".into());
        return Ok(stats);
    }
    let actions: Vec<Action> = buffer.master.iter().map(|m| Action::Discrete(m.choice)).collect();
    let batch = Batch {
        obs: buffer.master.iter().map(|m| m.obs.as_slice()).collect(),
        actions: actions.iter().collect(),
        old_log_prob: buffer.master.iter().map(|m| m.log_prob).collect(),
        advantages: normalized(buffer.master_advantages.clone(), ppo.normalize_advantages),
        returns: buffer.master_returns.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = buffer.master.len();
    let (mut steps, mut clipped) = (0usize, 0usize);
    for _ in 0..ppo.epochs {
        for mb in minibatches(n, ppo, &mut rng) {
            let sur = surrogate_grad(&agent.master, &batch, &mb, ppo)?;
            apply_policy_grads(&mut agent.master, sur.grads, ppo)?;
            stats.value_loss += value_step(&mut agent.master, &batch, &mb, ppo)?;
            stats.policy_loss += sur.loss;
            stats.entropy += sur.entropy;
            clipped += sur.clipped;
            steps += 1;
        }
    }
    stats.policy_loss /= steps as f64;
    stats.value_loss /= steps as f64;
    stats.entropy /= steps as f64;
    stats.clip_fraction = clipped as f64 / (ppo.epochs * n) as f64;
    Ok(stats)
}
