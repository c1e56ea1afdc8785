use crate::error::{Error, Result};
use crate::neural::Action;

/// Generalized advantage estimates for one segment. `bootstrap` is the value
/// of the state after the last step (zero for terminal segments).
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(rewards: &[f64], values: &[f64], bootstrap: f64, discount: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let discounts = vec![discount; rewards.len()];
    gae_with_discounts(rewards, values, bootstrap, &discounts, lambda)
}

/// GAE with a per-step discount, used for temporally extended master decisions.
pub fn gae_with_discounts(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    discounts: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::Shape { expected: rewards.len(), got: values.len() });
    }
    if rewards.len() != discounts.len() {
        return Err(Error::Shape { expected: rewards.len(), got: discounts.len() });
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let delta = rewards[t] + discounts[t] * next_value - values[t];
        running = delta + discounts[t] * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// One environment step under a subpolicy.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    /// Critic output of the acting subpolicy at `obs`.
    pub value: f64,
    pub log_prob: f64,
    pub subpolicy: usize,
    /// Whether the master chose a subpolicy at this step.
    pub decision: bool,
}

/// One master decision and the discounted reward collected during its tenure.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterRecord {
    pub obs: Vec<f64>,
    pub choice: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub steps: usize,
    pub done: bool,
}

/// Experience from complete episodes.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub steps: Vec<StepRecord>,
    pub master: Vec<MasterRecord>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub master_advantages: Vec<f64>,
    pub master_returns: Vec<f64>,
    open_episode: bool,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_step(&mut self, record: StepRecord) {
        self.open_episode = !record.done;
        self.steps.push(record);
    }

    pub fn push_decision(&mut self, record: MasterRecord) {
        self.master.push(record);
    }

    /// Adds reward to the most recent master decision's tenure.
    pub fn credit_master(&mut self, reward: f64, discount_power: f64, done: bool) -> Result<()> {
        let last = self
            .master
            .last_mut()
            .ok_or_else(|| Error::Usage("no open master decision to credit".into()))?;
        last.reward += discount_power * reward;
        last.steps += 1;
        last.done = done;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step indices executed by subpolicy `k`.
    pub fn indices_for(&self, k: usize) -> Vec<usize> {
        (0..self.steps.len()).filter(|&i| self.steps[i].subpolicy == k).collect()
    }

    /// Observations visited by subpolicy `k`.
    pub fn states_for(&self, k: usize) -> Vec<Vec<f64>> {
        self.steps.iter().filter(|s| s.subpolicy == k).map(|s| s.obs.clone()).collect()
    }

    /// Computes step-level and master-level advantages. Every episode must be
    /// complete; episodes end in a terminal state so no bootstrap is used.
    pub fn compute_advantages(&mut self, discount: f64, lambda: f64, master_discount_per_step: f64) -> Result<()> {
        if self.open_episode {
            return Err(Error::Usage("advantages requested before the episode finished".into()));
        }
        self.advantages.clear();
        self.returns.clear();
        let mut start = 0;
        for end in 0..self.steps.len() {
            if self.steps[end].done {
                let seg = &self.steps[start..=end];
                let rewards: Vec<f64> = seg.iter().map(|s| s.reward).collect();
                let values: Vec<f64> = seg.iter().map(|s| s.value).collect();
                let (a, r) = gae(&rewards, &values, 0.0, discount, lambda)?;
                self.advantages.extend(a);
                self.returns.extend(r);
                start = end + 1;
            }
        }
        self.master_advantages.clear();
        self.master_returns.clear();
        let mut start = 0;
        for end in 0..self.master.len() {
            if self.master[end].done {
                let seg = &self.master[start..=end];
                let rewards: Vec<f64> = seg.iter().map(|m| m.reward).collect();
                let values: Vec<f64> = seg.iter().map(|m| m.value).collect();
                let discounts: Vec<f64> = seg.iter().map(|m| master_discount_per_step.powi(m.steps as i32)).collect();
                let (a, r) = gae_with_discounts(&rewards, &values, 0.0, &discounts, lambda)?;
                self.master_advantages.extend(a);
                self.master_returns.extend(r);
                start = end + 1;
            }
        }
        Ok(())
    }

    /// Undiscounted return of every finished episode, in order.
    pub fn episode_returns(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        for s in &self.steps {
            acc += s.reward;
            if s.done {
                out.push(acc);
                acc = 0.0;
            }
        }
        out
    }
}
