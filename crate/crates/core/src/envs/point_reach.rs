//! Point mass steered by a bounded 2-D velocity toward a goal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Env, EnvStep, StepInfo};
use crate::error::{Error, Result};
use crate::neural::{Action, HeadKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointReachConfig {
    /// Positions live in `[-half_width, half_width]^2`.
    pub half_width: f64,
    /// Bound on each velocity component per step.
    pub max_speed: f64,
    pub horizon: usize,
}

impl Default for PointReachConfig {
    fn default() -> Self {
        Self { half_width: 5.0, max_speed: 0.5, horizon: 50 }
    }
}

impl PointReachConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !(self.max_speed > 0.0) || self.horizon == 0 {
            return Err(Error::Config("point reach geometry must be positive".into()));
        }
        Ok(())
    }
}

/// The task is the goal; the start is redrawn every episode.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReach {
    config: PointReachConfig,
    pos: [f64; 2],
    goal: [f64; 2],
    steps: usize,
}

impl PointReach {
    pub fn new(config: PointReachConfig, task_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut env = Self { pos: [0.0; 2], goal: [0.0; 2], steps: 0, config };
        env.resample_task(task_seed);
        env.reset(task_seed);
        Ok(env)
    }

    pub fn with_state(config: PointReachConfig, pos: [f64; 2], goal: [f64; 2]) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, pos, goal, steps: 0 })
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    pub fn distance(&self) -> f64 {
        ((self.pos[0] - self.goal[0]).powi(2) + (self.pos[1] - self.goal[1]).powi(2)).sqrt()
    }

    fn observation(&self) -> Vec<f64> {
        let s = self.config.half_width;
        vec![self.pos[0] / s, self.pos[1] / s, self.goal[0] / s, self.goal[1] / s]
    }

    /// Best achievable return from `start` to `goal`: each coordinate can
    /// close at most `max_speed` per step, independently of the other.
    pub fn optimal_return(config: &PointReachConfig, start: [f64; 2], goal: [f64; 2]) -> f64 {
        let (dx, dy) = ((goal[0] - start[0]).abs(), (goal[1] - start[1]).abs());
        (1..=config.horizon)
            .map(|t| {
                let r = t as f64 * config.max_speed;
                -((dx - r).max(0.0).powi(2) + (dy - r).max(0.0).powi(2)).sqrt()
            })
            .sum()
    }
}

impl Env for PointReach {
    fn obs_dim(&self) -> usize {
        4
    }

    fn head(&self) -> HeadKind {
        HeadKind::Gaussian { dim: 2 }
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.config.half_width;
        self.pos = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let v = match action {
            Action::Continuous(v) if v.len() == 2 => v,
            Action::Continuous(v) => return Err(Error::Shape { expected: 2, got: v.len() }),
            Action::Discrete(_) => return Err(Error::Domain("point reach actions are continuous".into())),
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point reach action".into()));
        }
        let m = self.config.max_speed;
        let h = self.config.half_width;
        let clipped = v.iter().any(|x| x.abs() > m);
        for i in 0..2 {
            self.pos[i] = (self.pos[i] + v[i].clamp(-m, m)).clamp(-h, h);
        }
        self.steps += 1;
        let distance = self.distance();
        Ok(EnvStep {
            observation: self.observation(),
            reward: -distance,
            done: self.steps >= self.config.horizon,
            info: StepInfo { clipped, distance },
        })
    }

    fn resample_task(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x90a1);
        let h = self.config.half_width;
        self.goal = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_action_stays_put() {
        let mut env = PointReach::with_state(PointReachConfig::default(), [1.0, 2.0], [4.0, 6.0]).unwrap();
        let s = env.step(&Action::Continuous(vec![0.0, 0.0])).unwrap();
        assert_eq!(env.position(), [1.0, 2.0]);
        assert_eq!(s.reward, -5.0);
        assert!(!s.info.clipped);
    }

    #[test]
    fn out_of_bounds_actions_are_clipped_and_flagged() {
        let mut env = PointReach::with_state(PointReachConfig::default(), [0.0, 0.0], [4.0, 0.0]).unwrap();
        let s = env.step(&Action::Continuous(vec![3.0, -0.1])).unwrap();
        assert!(s.info.clipped);
        assert_eq!(env.position(), [0.5, -0.1]);
    }

    #[test]
    fn heading_at_goal_shrinks_distance_until_overshoot() {
        let mut env = PointReach::with_state(PointReachConfig::default(), [0.0, 0.0], [2.2, 0.0]).unwrap();
        let mut last = f64::INFINITY;
        let mut rewards = Vec::new();
        for _ in 0..6 {
            let s = env.step(&Action::Continuous(vec![0.5, 0.0])).unwrap();
            rewards.push(s.reward);
        }
        // distances 1.7, 1.2, 0.7, 0.2, then overshoot to 0.3, 0.8
        for r in &rewards[..4] {
            assert!(r.abs() < last);
            last = r.abs();
        }
        assert!(rewards[4].abs() > rewards[3].abs());
    }

    #[test]
    fn greedy_controller_meets_the_analytic_bound() {
        let cfg = PointReachConfig::default();
        let (start, goal) = ([-4.0, 3.0], [2.5, -1.0]);
        let mut env = PointReach::with_state(cfg.clone(), start, goal).unwrap();
        let mut total = 0.0;
        loop {
            let p = env.position();
            let v = vec![goal[0] - p[0], goal[1] - p[1]];
            let v = v.into_iter().map(|x| x.clamp(-cfg.max_speed, cfg.max_speed)).collect();
            let s = env.step(&Action::Continuous(v)).unwrap();
            total += s.reward;
            if s.done {
                break;
            }
        }
        let best = PointReach::optimal_return(&cfg, start, goal);
        assert!(best < 0.0);
        assert!((total - best).abs() <= 0.02 * best.abs(), "{total} vs {best}");
    }

    #[test]
    fn seeded_reset_and_task() {
        let mut a = PointReach::new(PointReachConfig::default(), 4).unwrap();
        let mut b = PointReach::new(PointReachConfig::default(), 4).unwrap();
        assert_eq!(a.reset(9), b.reset(9));
        a.resample_task(1);
        b.resample_task(2);
        assert_ne!(a.goal(), b.goal());
    }

    #[test]
    fn rewards_are_nonpositive() {
        let mut env = PointReach::new(PointReachConfig::default(), 0).unwrap();
        env.reset(0);
        for i in 0..50 {
            let s = env.step(&Action::Continuous(vec![(i as f64).sin(), (i as f64).cos()])).unwrap();
            assert!(s.reward <= 0.0);
        }
    }
}
