//! Planar navigation with several candidate targets, only one of which pays.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Env, EnvStep, StepInfo};
use crate::error::{Error, Result};
use crate::neural::{Action, HeadKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MovementBanditsConfig {
    /// Side length of the square arena `[0, arena]^2`.
    pub arena: f64,
    pub step_size: f64,
    /// Reward is paid within this distance (inclusive) of the correct target.
    pub reward_radius: f64,
    pub horizon: usize,
    pub targets: usize,
}

impl Default for MovementBanditsConfig {
    fn default() -> Self {
        Self { arena: 100.0, step_size: 5.0, reward_radius: 10.0, horizon: 50, targets: 2 }
    }
}

impl MovementBanditsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.arena > 0.0) || !(self.step_size > 0.0) || !(self.reward_radius >= 0.0) {
            return Err(Error::Config("arena and step size must be > 0, radius >= 0".into()));
        }
        if self.horizon == 0 || self.targets == 0 {
            return Err(Error::Config("horizon and target count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        2 + 2 * self.targets
    }
}

/// Discrete moves, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl MbAction {
    pub const ALL: [MbAction; 5] = [MbAction::Up, MbAction::Down, MbAction::Left, MbAction::Right, MbAction::Stay];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Domain(format!("movement action index {i} outside 0..5")))
    }

    fn delta(self) -> (f64, f64) {
        match self {
            MbAction::Up => (0.0, 1.0),
            MbAction::Down => (0.0, -1.0),
            MbAction::Left => (-1.0, 0.0),
            MbAction::Right => (1.0, 0.0),
            MbAction::Stay => (0.0, 0.0),
        }
    }
}

/// The task is `correct_index`; target positions are redrawn every episode.
/// Observations hold the agent and target positions scaled by the arena
/// size, never the correct index.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementBandits {
    config: MovementBanditsConfig,
    agent: [f64; 2],
    targets: Vec<[f64; 2]>,
    correct: usize,
    steps: usize,
}

impl MovementBandits {
    pub fn new(config: MovementBanditsConfig, task_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut env = Self { agent: [0.0; 2], targets: Vec::new(), correct: 0, steps: 0, config };
        env.resample_task(task_seed);
        env.reset(task_seed);
        Ok(env)
    }

    /// Builds an environment in an explicit state.
    pub fn with_state(config: MovementBanditsConfig, agent: [f64; 2], targets: Vec<[f64; 2]>, correct: usize) -> Result<Self> {
        config.validate()?;
        if targets.len() != config.targets {
            return Err(Error::Shape { expected: config.targets, got: targets.len() });
        }
        if correct >= targets.len() {
            return Err(Error::Domain(format!("correct index {correct} outside 0..{}", targets.len())));
        }
        Ok(Self { config, agent, targets, correct, steps: 0 })
    }

    pub fn config(&self) -> &MovementBanditsConfig {
        &self.config
    }

    pub fn correct_index(&self) -> usize {
        self.correct
    }

    /// Sets the task directly.
    pub fn set_correct_index(&mut self, correct: usize) -> Result<()> {
        if correct >= self.config.targets {
            return Err(Error::Domain(format!("correct index {correct} outside 0..{}", self.config.targets)));
        }
        self.correct = correct;
        Ok(())
    }

    pub fn agent_position(&self) -> [f64; 2] {
        self.agent
    }

    pub fn targets(&self) -> &[[f64; 2]] {
        &self.targets
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = self.config.arena;
        let mut obs = Vec::with_capacity(self.config.obs_dim());
        obs.extend([self.agent[0] / s, self.agent[1] / s]);
        for t in &self.targets {
            obs.extend([t[0] / s, t[1] / s]);
        }
        obs
    }

    fn distance_to_correct(&self) -> f64 {
        let t = self.targets[self.correct];
        ((self.agent[0] - t[0]).powi(2) + (self.agent[1] - t[1]).powi(2)).sqrt()
    }

    pub fn step_move(&mut self, action: MbAction) -> EnvStep {
        let (dx, dy) = action.delta();
        let a = self.config.arena;
        self.agent[0] = (self.agent[0] + dx * self.config.step_size).clamp(0.0, a);
        self.agent[1] = (self.agent[1] + dy * self.config.step_size).clamp(0.0, a);
        self.steps += 1;
        let distance = self.distance_to_correct();
        let reward = if distance <= self.config.reward_radius { 1.0 } else { 0.0 };
        EnvStep {
            observation: self.observation(),
            reward,
            done: self.steps >= self.config.horizon,
            info: StepInfo { clipped: false, distance },
        }
    }
}

impl Env for MovementBandits {
    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    fn head(&self) -> HeadKind {
        HeadKind::Categorical { actions: MbAction::ALL.len() }
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = self.config.arena;
        self.agent = [a / 2.0, a / 2.0];
        self.targets = (0..self.config.targets)
            .map(|_| [rng.random_range(0.0..=a), rng.random_range(0.0..=a)])
            .collect();
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let i = action
            .index()
            .ok_or_else(|| Error::Domain("movement actions are discrete".into()))?;
        Ok(self.step_move(MbAction::from_index(i)?))
    }

    fn resample_task(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a5c);
        self.correct = rng.random_range(0..self.config.targets);
    }

    fn task_id(&self) -> usize {
        self.correct
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_seeded() {
        let mut a = MovementBandits::new(MovementBanditsConfig::default(), 1).unwrap();
        let mut b = a.clone();
        assert_eq!(a.reset(5), b.reset(5));
        assert_ne!(a.reset(5), b.reset(6));
    }

    #[test]
    fn observation_layout() {
        let cfg = MovementBanditsConfig { targets: 3, ..MovementBanditsConfig::default() };
        let mut env = MovementBandits::new(cfg, 0).unwrap();
        let obs = env.reset(2);
        assert_eq!(obs.len(), 2 + 2 * 3);
        assert_eq!(&obs[..2], &[0.5, 0.5]);
        assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn correct_index_is_uniform() {
        // chi-square with 1 degree of freedom, 1% critical value 6.635
        let n = 1000;
        let mut counts = [0usize; 2];
        for seed in 0..n {
            counts[MovementBandits::new(MovementBanditsConfig::default(), seed).unwrap().correct_index()] += 1;
        }
        let expected = n as f64 / 2.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 6.635, "{counts:?} chi2 {chi2}");
    }

    #[test]
    fn task_survives_resets() {
        let mut env = MovementBandits::new(MovementBanditsConfig::default(), 3).unwrap();
        let c = env.correct_index();
        for s in 0..20 {
            env.reset(s);
            assert_eq!(env.correct_index(), c);
        }
    }

    #[test]
    fn reward_rule() {
        let cfg = MovementBanditsConfig::default();
        let mut env = MovementBandits::with_state(cfg.clone(), [50.0, 50.0], vec![[55.0, 50.0], [10.0, 10.0]], 0).unwrap();
        assert_eq!(env.step(&Action::Discrete(4)).unwrap().reward, 1.0);
        let mut env = MovementBandits::with_state(cfg, [50.0, 50.0], vec![[90.0, 90.0], [10.0, 10.0]], 0).unwrap();
        assert_eq!(env.step(&Action::Discrete(4)).unwrap().reward, 0.0);
    }

    #[test]
    fn invalid_action() {
        let mut env = MovementBandits::new(MovementBanditsConfig::default(), 0).unwrap();
        assert!(matches!(env.step(&Action::Discrete(5)), Err(Error::Domain(_))));
        assert!(matches!(env.step(&Action::Continuous(vec![0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn walls_clip_movement() {
        let mut env = MovementBandits::with_state(MovementBanditsConfig::default(), [2.0, 98.0], vec![[0.0, 0.0], [0.0, 0.0]], 0).unwrap();
        env.step_move(MbAction::Left);
        env.step_move(MbAction::Up);
        assert_eq!(env.agent_position(), [0.0, 100.0]);
    }

    #[test]
    fn scripted_walk() {
        // Target 30 straight up. Six Up moves reach y = 80; rewards start at
        // y = 70 (step 4) and continue while staying, through step 50.
        let mut env = MovementBandits::with_state(MovementBanditsConfig::default(), [50.0, 50.0], vec![[10.0, 10.0], [50.0, 80.0]], 1).unwrap();
        let mut total = 0.0;
        let mut rewards = Vec::new();
        for t in 0..50 {
            let a = if t < 6 { MbAction::Up } else { MbAction::Stay };
            let s = env.step_move(a);
            total += s.reward;
            rewards.push(s.reward);
            assert_eq!(s.done, t == 49);
        }
        assert_eq!(&rewards[..4], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(total, 47.0);
    }
}
