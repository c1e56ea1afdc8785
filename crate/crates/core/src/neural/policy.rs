use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::{DistGrad, DistParams};
use super::mlp::{Mlp, MlpCache};
use crate::error::{check_dim, Error, Result};

/// Output head of a policy network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadKind {
    /// Logits over `actions` discrete choices.
    Categorical { actions: usize },
    /// Mean of dimension `dim` plus a state-independent learned log-std.
    Gaussian { dim: usize },
}

impl HeadKind {
    /// Width of the action vector fed to the behavior embedding.
    pub fn action_dim(&self) -> usize {
        match *self {
            HeadKind::Categorical { actions } => actions,
            HeadKind::Gaussian { dim } => dim,
        }
    }
}

/// Forward-pass record tied to the parameter version it was computed with.
#[derive(Debug, Clone)]
pub struct PolicyCache {
    mlp: MlpCache,
    version: u64,
}

/// Feedforward actor: tanh MLP body and a categorical or Gaussian head.
/// Flat parameter layout is the MLP parameters followed, for Gaussian heads,
/// by the log-std vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    body: Mlp,
    head: HeadKind,
    params: Vec<f64>,
    seed: u64,
    #[serde(skip)]
    version: u64,
}

impl PolicyNet {
    pub fn new(obs_dim: usize, hidden: &[usize], head: HeadKind, init_log_std: f64, seed: u64) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(head.action_dim());
        let body = Mlp::new(sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = body.init_params(&mut rng, 0.01);
        if let HeadKind::Gaussian { dim } = head {
            params.extend(std::iter::repeat_n(init_log_std, dim));
        }
        Self { body, head, params, seed, version: 0 }
    }

    /// Rebuild from a stored architecture and flat parameters.
    pub fn from_parts(layer_sizes: Vec<usize>, head: HeadKind, params: Vec<f64>, seed: u64) -> Result<Self> {
        let body = Mlp::new(layer_sizes);
        check_dim(head.action_dim(), body.output_dim())?;
        let extra = match head {
            HeadKind::Categorical { .. } => 0,
            HeadKind::Gaussian { dim } => dim,
        };
        check_dim(body.param_count() + extra, params.len())?;
        Ok(Self { body, head, params, seed, version: 0 })
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.body.sizes()
    }

    pub fn obs_dim(&self) -> usize {
        self.body.input_dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn body_len(&self) -> usize {
        self.body.param_count()
    }

    pub fn forward(&self, obs: &[f64]) -> Result<(DistParams, PolicyCache)> {
        let n = self.body_len();
        let mlp = self.body.forward(&self.params[..n], obs)?;
        let out = mlp.output().to_vec();
        let dist = match self.head {
            HeadKind::Categorical { .. } => DistParams::Categorical { logits: out },
            HeadKind::Gaussian { .. } => DistParams::Gaussian { mean: out, log_std: self.params[n..].to_vec() },
        };
        Ok((dist, PolicyCache { mlp, version: self.version }))
    }

    /// Accumulates parameter gradients of a scalar whose gradient with respect
    /// to the head output is `upstream`.
    pub fn backward_into(&self, cache: &PolicyCache, upstream: &DistGrad, grads: &mut [f64]) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::Usage(format!(
                "policy cache from version {} used with version {}",
                cache.version, self.version
            )));
        }
        check_dim(self.params.len(), grads.len())?;
        let n = self.body_len();
        let (body_grads, head_grads) = grads.split_at_mut(n);
        match (self.head, upstream) {
            (HeadKind::Categorical { .. }, DistGrad::Categorical { d_logits }) => {
                self.body.backward(&self.params[..n], &cache.mlp, d_logits, body_grads)?;
            }
            (HeadKind::Gaussian { .. }, DistGrad::Gaussian { d_mean, d_log_std }) => {
                self.body.backward(&self.params[..n], &cache.mlp, d_mean, body_grads)?;
                check_dim(head_grads.len(), d_log_std.len())?;
                head_grads.iter_mut().zip(d_log_std).for_each(|(g, d)| *g += d);
            }
            _ => return Err(Error::Usage("upstream gradient does not match head kind".into())),
        }
        Ok(())
    }

    pub fn backward(&self, cache: &PolicyCache, upstream: &DistGrad) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(cache, upstream, &mut grads)?;
        Ok(grads)
    }
}

#[derive(Debug, Clone)]
pub struct ValueCache {
    mlp: MlpCache,
    version: u64,
}

/// Scalar state-value critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    body: Mlp,
    params: Vec<f64>,
    seed: u64,
    #[serde(skip)]
    version: u64,
}

impl ValueNet {
    pub fn new(obs_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let body = Mlp::new(sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = body.init_params(&mut rng, 1.0);
        Self { body, params, seed, version: 0 }
    }

    pub fn from_parts(layer_sizes: Vec<usize>, params: Vec<f64>, seed: u64) -> Result<Self> {
        let body = Mlp::new(layer_sizes);
        check_dim(1, body.output_dim())?;
        check_dim(body.param_count(), params.len())?;
        Ok(Self { body, params, seed, version: 0 })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.body.sizes()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn forward(&self, obs: &[f64]) -> Result<(f64, ValueCache)> {
        let mlp = self.body.forward(&self.params, obs)?;
        Ok((mlp.output()[0], ValueCache { mlp, version: self.version }))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.forward(obs)?.0)
    }

    pub fn backward_into(&self, cache: &ValueCache, d_out: f64, grads: &mut [f64]) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::Usage("value cache is stale".into()));
        }
        self.body.backward(&self.params, &cache.mlp, &[d_out], grads)?;
        Ok(())
    }
}
