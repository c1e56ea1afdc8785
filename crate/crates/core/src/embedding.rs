//! Behavior embedding: shared rollout states, common-random-number action
//! sampling, and the random-feature pushforward of sampled actions.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::neural::{one_hot, softmax, DistGrad, DistParams, HeadKind, PolicyNet};
use crate::ot::RandomFeatureMap;

/// Embedding hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingParams {
    /// Rollout states per comparison (`T`).
    pub states: usize,
    /// Actions sampled per state and policy (`B`).
    pub samples_per_state: usize,
    /// Random feature count (`m`).
    pub features: usize,
    pub bandwidth: f64,
    /// Temperature of the relaxed one-hot used for categorical gradients.
    pub temperature: f64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        Self { states: 32, samples_per_state: 8, features: 128, bandwidth: 1.0, temperature: 0.5 }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        if self.states == 0 || self.samples_per_state == 0 || self.features == 0 {
            return Err(Error::Config("embedding counts must be >= 1".into()));
        }
        if !(self.bandwidth > 0.0) || !(self.temperature > 0.0) {
            return Err(Error::Config("bandwidth and temperature must be > 0".into()));
        }
        Ok(())
    }
}

/// States at which two subpolicies are compared.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    states: Vec<Vec<f64>>,
    /// Subpolicy indices whose trajectories supplied the states.
    pub source: (usize, usize),
    id: u64,
}

impl StateSet {
    pub fn new(states: Vec<Vec<f64>>, source: (usize, usize)) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Collection { needed: 1, available: 0 });
        }
        let dim = states[0].len();
        if let Some(s) = states.iter().find(|s| s.len() != dim) {
            return Err(Error::Shape { expected: dim, got: s.len() });
        }
        let id = content_id(&states, source);
        Ok(Self { states, source, id })
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn id(&self) -> u64 {
        self.id
    }
}

// FNV-1a over the raw float bits.
fn content_id(states: &[Vec<f64>], source: (usize, usize)) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: u64| {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(source.0 as u64);
    feed(source.1 as u64);
    for s in states {
        for v in s {
            feed(v.to_bits());
        }
    }
    h
}

/// Draws `count` states uniformly without replacement from the recent
/// trajectories of two subpolicies, half from each where possible.
pub fn collect_rollout_states(
    states_k: &[Vec<f64>],
    states_l: &[Vec<f64>],
    count: usize,
    source: (usize, usize),
    seed: u64,
) -> Result<StateSet> {
    let available = states_k.len() + states_l.len();
    if count == 0 {
        return Err(Error::Config("state count must be >= 1".into()));
    }
    if available < count {
        return Err(Error::Collection { needed: count, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = count / 2;
    let from_k = if states_k.len() < half {
        states_k.len()
    } else if states_l.len() < count - half {
        count - states_l.len()
    } else {
        half
    };
    let from_l = count - from_k;
    let mut picked: Vec<Vec<f64>> = Vec::with_capacity(count);
    for i in sample_indices(&mut rng, states_k.len(), from_k) {
        picked.push(states_k[i].clone());
    }
    for i in sample_indices(&mut rng, states_l.len(), from_l) {
        picked.push(states_l[i].clone());
    }
    picked.shuffle(&mut rng);
    StateSet::new(picked, source)
}

/// Seeded stream of random draws. Two streams built from the same seed
/// produce the same sequence.
#[derive(Debug, Clone)]
pub struct CrnStream {
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl CrnStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, draws: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.draws += 1;
        StandardNormal.sample(&mut self.rng)
    }
}

/// Random inputs behind one sampled action.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleNoise {
    Gaussian { eps: Vec<f64> },
    /// Inverse-CDF uniform, Gumbel noise for the relaxation, and the hard index.
    Categorical { uniform: f64, gumbel: Vec<f64>, index: usize },
}

/// What is needed to push gradients back through one policy's sampled actions.
#[derive(Debug, Clone)]
pub struct ReparamCache {
    pub head: HeadKind,
    /// State index (into the state set) of each sample.
    pub state_index: Vec<usize>,
    pub noise: Vec<SampleNoise>,
    pub temperature: f64,
    pub state_set_id: u64,
}

impl ReparamCache {
    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    /// Re-evaluates sample `i` under distribution `dist` (the policy at the
    /// sample's state), returning the action vector fed to the embedding.
    pub fn action_vector(&self, i: usize, dist: &DistParams) -> Result<Vec<f64>> {
        match (&self.noise[i], dist) {
            (SampleNoise::Gaussian { eps }, DistParams::Gaussian { .. }) => dist.sample_gaussian(eps),
            (SampleNoise::Categorical { uniform, .. }, DistParams::Categorical { logits }) => {
                Ok(one_hot(dist.sample_categorical(*uniform)?, logits.len()))
            }
            _ => Err(Error::Usage("noise kind does not match head".into())),
        }
    }

    /// Maps `dL/d(action vector)` for sample `i` to a gradient on the head
    /// output. Gaussian heads differentiate `mean + exp(log_std) * eps`
    /// exactly; categorical heads use the Jacobian of the relaxed one-hot
    /// `softmax((logits + gumbel) / temperature)` as a straight-through surrogate.
    pub fn pull_to_head(&self, i: usize, dist: &DistParams, d_action: &[f64]) -> Result<DistGrad> {
        match (&self.noise[i], dist) {
            (SampleNoise::Gaussian { eps }, DistParams::Gaussian { log_std, .. }) => {
                check_dim(eps.len(), d_action.len())?;
                Ok(DistGrad::Gaussian {
                    d_mean: d_action.to_vec(),
                    d_log_std: d_action.iter().zip(log_std).zip(eps).map(|((g, ls), e)| g * ls.exp() * e).collect(),
                })
            }
            (SampleNoise::Categorical { gumbel, .. }, DistParams::Categorical { logits }) => {
                check_dim(logits.len(), d_action.len())?;
                let z: Vec<f64> = logits.iter().zip(gumbel).map(|(l, g)| (l + g) / self.temperature).collect();
                let r = softmax(&z);
                let rg: f64 = r.iter().zip(d_action).map(|(a, b)| a * b).sum();
                Ok(DistGrad::Categorical {
                    d_logits: r.iter().zip(d_action).map(|(ri, gi)| ri * (gi - rg) / self.temperature).collect(),
                })
            }
            _ => Err(Error::Usage("noise kind does not match head".into())),
        }
    }
}

/// Samples `per_state` actions from `policy` at every state, drawing noise
/// from `crn` in state-major order.
pub fn sample_actions(
    policy: &PolicyNet,
    states: &StateSet,
    per_state: usize,
    crn: &mut CrnStream,
    temperature: f64,
) -> Result<(Vec<Vec<f64>>, ReparamCache)> {
    if per_state == 0 {
        return Err(Error::Config("samples per state must be >= 1".into()));
    }
    let head = policy.head();
    let h = states.len() * per_state;
    let mut actions = Vec::with_capacity(h);
    let mut cache = ReparamCache {
        head,
        state_index: Vec::with_capacity(h),
        noise: Vec::with_capacity(h),
        temperature,
        state_set_id: states.id(),
    };
    for (t, s) in states.states().iter().enumerate() {
        let (dist, _) = policy.forward(s)?;
        for _ in 0..per_state {
            let noise = match head {
                HeadKind::Gaussian { dim } => SampleNoise::Gaussian { eps: (0..dim).map(|_| crn.normal()).collect() },
                HeadKind::Categorical { actions } => {
                    let uniform = crn.uniform();
                    let gumbel = (0..actions)
                        .map(|_| {
                            let u = crn.uniform().max(1e-300);
                            -(-u.ln()).ln()
                        })
                        .collect();
                    let index = dist.sample_categorical(uniform)?;
                    SampleNoise::Categorical { uniform, gumbel, index }
                }
            };
            cache.state_index.push(t);
            cache.noise.push(noise);
            actions.push(cache.action_vector(cache.len() - 1, &dist)?);
        }
    }
    Ok((actions, cache))
}

/// Actions from two policies at the same states.
#[derive(Debug, Clone)]
pub struct ActionPairs {
    pub actions_k: Vec<Vec<f64>>,
    pub actions_l: Vec<Vec<f64>>,
    /// Reparameterization record for the first policy's samples.
    pub cache_k: ReparamCache,
}

/// Samples `per_state` actions per state from both policies using the same
/// random draws for each (common random numbers).
pub fn sample_action_pairs(
    pi_k: &PolicyNet,
    pi_l: &PolicyNet,
    states: &StateSet,
    per_state: usize,
    crn: &mut CrnStream,
    temperature: f64,
) -> Result<ActionPairs> {
    if pi_k.head() != pi_l.head() {
        return Err(Error::Config(format!(
            "action spaces differ: {:?} vs {:?}",
            pi_k.head(),
            pi_l.head()
        )));
    }
    let mut crn_l = crn.clone();
    let (actions_k, cache_k) = sample_actions(pi_k, states, per_state, crn, temperature)?;
    let (actions_l, _) = sample_actions(pi_l, states, per_state, &mut crn_l, temperature)?;
    Ok(ActionPairs { actions_k, actions_l, cache_k })
}

/// Same as [`sample_action_pairs`] but with independent streams per policy.
pub fn sample_action_pairs_independent(
    pi_k: &PolicyNet,
    pi_l: &PolicyNet,
    states: &StateSet,
    per_state: usize,
    crn_k: &mut CrnStream,
    crn_l: &mut CrnStream,
    temperature: f64,
) -> Result<ActionPairs> {
    if pi_k.head() != pi_l.head() {
        return Err(Error::Config("action spaces differ".into()));
    }
    let (actions_k, cache_k) = sample_actions(pi_k, states, per_state, crn_k, temperature)?;
    let (actions_l, _) = sample_actions(pi_l, states, per_state, crn_l, temperature)?;
    Ok(ActionPairs { actions_k, actions_l, cache_k })
}

/// Embedded action samples of one subpolicy at a shared state set.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardBatch {
    pub features: Vec<Vec<f64>>,
    pub policy_id: usize,
    pub state_set_id: u64,
}

impl PushforwardBatch {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

pub fn pushforward(
    map: &RandomFeatureMap,
    actions: &[Vec<f64>],
    policy_id: usize,
    state_set_id: u64,
) -> Result<PushforwardBatch> {
    Ok(PushforwardBatch { features: map.embed(actions)?, policy_id, state_set_id })
}
