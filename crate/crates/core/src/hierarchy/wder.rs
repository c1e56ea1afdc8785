//! Minimum pairwise Wasserstein distance between subpolicies and the
//! gradient of the diversity regularizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::agent::{derive_seed, HierAgent};
use crate::embedding::{sample_action_pairs, CrnStream, EmbeddingParams, ReparamCache, StateSet};
use crate::error::{Error, Result};
use crate::neural::DistGrad;
use crate::ot::{estimate_wd, fit_potentials_embedded, integrand_grad_x, DualPotentials, OtParams, ProductSampler, RandomFeatureMap};

/// Everything the regularizer needs besides the agent and states.
#[derive(Debug, Clone)]
pub struct RegularizerSetup {
    pub map: RandomFeatureMap,
    pub ot: OtParams,
    pub embedding: EmbeddingParams,
    /// Base seed for CRN streams, potential fitting, and evaluation pairs.
    pub seed: u64,
}

/// Estimated distance from subpolicy `k` to subpolicy `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEstimate {
    pub k: usize,
    pub j: usize,
    pub value: f64,
    pub potentials: DualPotentials,
}

/// State retained to differentiate the selected pair's dual objective with
/// respect to subpolicy `k`, with potentials and the other policy's samples fixed.
#[derive(Debug, Clone)]
pub struct WderCache {
    pub k: usize,
    pub j: usize,
    j_version: u64,
    state_set: StateSet,
    reparam: ReparamCache,
    phi_y: Vec<Vec<f64>>,
    eval: Vec<(usize, usize)>,
    potentials: DualPotentials,
    ot: OtParams,
    map: RandomFeatureMap,
}

impl WderCache {
    pub fn potentials(&self) -> &DualPotentials {
        &self.potentials
    }

    pub fn state_set(&self) -> &StateSet {
        &self.state_set
    }
}

#[derive(Debug, Clone)]
pub struct WdMin {
    pub value: f64,
    pub argmin: usize,
    /// Every pair evaluated, in increasing `j`.
    pub pairs: Vec<PairEstimate>,
    pub cache: WderCache,
}

fn unordered_key(k: usize, j: usize) -> u64 {
    let (a, b) = if k < j { (k, j) } else { (j, k) };
    ((a as u64) << 32) | b as u64
}

/// Estimates the distance from `k` to `j` at `states`. Both policies draw
/// from the same CRN stream; the stream seed depends only on the unordered pair.
pub fn pair_wd(agent: &HierAgent, k: usize, j: usize, states: &StateSet, setup: &RegularizerSetup) -> Result<(PairEstimate, WderCache)> {
    let key = unordered_key(k, j);
    let mut crn = CrnStream::new(derive_seed(setup.seed, key));
    let pi_k = &agent.subpolicies[k].policy;
    let pi_j = &agent.subpolicies[j].policy;
    let sampled = sample_action_pairs(
        pi_k,
        pi_j,
        states,
        setup.embedding.samples_per_state,
        &mut crn,
        setup.embedding.temperature,
    )?;
    let phi_x = setup.map.embed(&sampled.actions_k)?;
    let phi_y = setup.map.embed(&sampled.actions_l)?;
    let directed = ((k as u64) << 32) | j as u64;
    let mut sampler = ProductSampler::new(&phi_x, &phi_y)?;
    let potentials = fit_potentials_embedded(&mut sampler, setup.map.features(), &setup.ot, derive_seed(setup.seed ^ 0xf1, directed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(setup.seed ^ 0xe7, directed));
    let eval: Vec<(usize, usize)> = (0..setup.ot.eval_samples)
        .map(|_| (rng.random_range(0..phi_x.len()), rng.random_range(0..phi_y.len())))
        .collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = eval.iter().map(|&(a, b)| (phi_x[a].clone(), phi_y[b].clone())).collect();
    let value = estimate_wd(&potentials, &pairs, &setup.ot)?;
    let cache = WderCache {
        k,
        j,
        j_version: pi_j.version(),
        state_set: states.clone(),
        reparam: sampled.cache_k,
        phi_y,
        eval,
        potentials: potentials.clone(),
        ot: setup.ot,
        map: setup.map.clone(),
    };
    Ok((PairEstimate { k, j, value, potentials }, cache))
}

/// Minimum over `j != k` of the estimated distance from `k` to `j`. Ties go
/// to the lowest index.
pub fn wd_min(k: usize, agent: &HierAgent, states: &StateSet, setup: &RegularizerSetup) -> Result<WdMin> {
    let n = agent.k();
    if n < 2 {
        return Err(Error::Config("minimum pairwise distance needs at least two subpolicies".into()));
    }
    if k >= n {
        return Err(Error::Config(format!("subpolicy {k} out of range 0..{n}")));
    }
    if states.is_empty() {
        return Err(Error::Collection { needed: 1, available: 0 });
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != k).collect();
    let results: Vec<(PairEstimate, WderCache)> = others
        .par_iter()
        .map(|&j| pair_wd(agent, k, j, states, setup))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, (est, _)) in results.iter().enumerate() {
        if est.value < results[best].0.value {
            best = i;
        }
    }
    let value = results[best].0.value;
    let argmin = results[best].0.j;
    let mut pairs = Vec::with_capacity(results.len());
    let mut cache = None;
    for (i, (est, c)) in results.into_iter().enumerate() {
        if i == best {
            cache = Some(c);
        }
        pairs.push(est);
    }
    Ok(WdMin { value, argmin, pairs, cache: cache.expect("best index is in range") })
}

fn check_fresh(agent: &HierAgent, cache: &WderCache) -> Result<()> {
    if cache.k >= agent.k() || cache.j >= agent.k() {
        return Err(Error::Usage("regularizer cache refers to a missing subpolicy".into()));
    }
    if agent.subpolicies[cache.k].policy.head() != cache.reparam.head {
        return Err(Error::Usage("regularizer cache head does not match the policy".into()));
    }
    if agent.subpolicies[cache.j].policy.version() != cache.j_version {
        return Err(Error::Usage(format!(
            "regularizer cache is stale: subpolicy {} changed after the potentials were fit",
            cache.j
        )));
    }
    Ok(())
}

/// The selected pair's empirical dual objective re-evaluated at the current
/// parameters of subpolicy `k` (same noise, potentials, and partner samples).
pub fn wder_objective(agent: &HierAgent, cache: &WderCache) -> Result<f64> {
    check_fresh(agent, cache)?;
    let policy = &agent.subpolicies[cache.k].policy;
    let states = cache.state_set.states();
    let mut phi_x: Vec<Option<Vec<f64>>> = vec![None; cache.reparam.len()];
    let mut pairs = Vec::with_capacity(cache.eval.len());
    for &(a, b) in &cache.eval {
        if phi_x[a].is_none() {
            let (dist, _) = policy.forward(&states[cache.reparam.state_index[a]])?;
            let x = cache.reparam.action_vector(a, &dist)?;
            phi_x[a] = Some(cache.map.embed_one(&x)?);
        }
        pairs.push((phi_x[a].clone().unwrap(), cache.phi_y[b].clone()));
    }
    estimate_wd(&cache.potentials, &pairs, &cache.ot)
}

/// Gradient of `-alpha * WD_min` with respect to subpolicy `k`'s parameters.
/// Potentials stay fixed; the gradient reaches the parameters only through
/// `k`'s reparameterized (or relaxed) samples.
pub fn wder_gradient(agent: &HierAgent, cache: &WderCache, alpha: f64) -> Result<Vec<f64>> {
    check_fresh(agent, cache)?;
    let policy = &agent.subpolicies[cache.k].policy;
    let mut grads = vec![0.0; policy.param_count()];
    if alpha == 0.0 {
        return Ok(grads);
    }
    let states = cache.state_set.states();
    let samples = cache.reparam.len();
    let mut forwards = vec![None; states.len()];
    let mut actions: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; samples];
    let mut d_action: Vec<Option<Vec<f64>>> = vec![None; samples];
    let scale = 1.0 / cache.eval.len() as f64;
    for &(a, b) in &cache.eval {
        let t = cache.reparam.state_index[a];
        if forwards[t].is_none() {
            forwards[t] = Some(policy.forward(&states[t])?);
        }
        if actions[a].is_none() {
            let (dist, _) = forwards[t].as_ref().unwrap();
            let x = cache.reparam.action_vector(a, dist)?;
            let phi = cache.map.embed_one(&x)?;
            actions[a] = Some((x, phi));
        }
        let (x, phi) = actions[a].as_ref().unwrap();
        let mut g_phi = integrand_grad_x(&cache.potentials, phi, &cache.phi_y[b], &cache.ot)?;
        g_phi.iter_mut().for_each(|g| *g *= scale);
        let g_x = cache.map.pullback(x, &g_phi)?;
        match &mut d_action[a] {
            Some(acc) => acc.iter_mut().zip(&g_x).for_each(|(s, g)| *s += g),
            slot => *slot = Some(g_x),
        }
    }
    let mut head_grads: Vec<Option<DistGrad>> = vec![None; states.len()];
    for (a, d) in d_action.iter().enumerate() {
        let Some(d) = d else { continue };
        let t = cache.reparam.state_index[a];
        let (dist, _) = forwards[t].as_ref().unwrap();
        let g = cache.reparam.pull_to_head(a, dist, d)?;
        match &mut head_grads[t] {
            Some(acc) => acc.add_scaled(&g, 1.0),
            slot => *slot = Some(g),
        }
    }
    for (t, g) in head_grads.iter().enumerate() {
        if let (Some(g), Some((_, pcache))) = (g, &forwards[t]) {
            policy.backward_into(pcache, g, &mut grads)?;
        }
    }
    grads.iter_mut().for_each(|g| *g *= -alpha);
    Ok(grads)
}
