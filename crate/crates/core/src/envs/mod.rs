//! Small environments behind a common interface.

mod movement_bandits;
mod point_reach;

pub use movement_bandits::{MbAction, MovementBandits, MovementBanditsConfig};
pub use point_reach::{PointReach, PointReachConfig};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::neural::{Action, HeadKind};

/// Extra per-step diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepInfo {
    /// The action was outside its bounds and was clipped.
    pub clipped: bool,
    /// Distance from the agent to its goal after the step.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

pub trait Env {
    fn obs_dim(&self) -> usize;
    fn head(&self) -> HeadKind;
    fn horizon(&self) -> usize;
    /// Starts an episode of the current task. Deterministic in `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &Action) -> Result<EnvStep>;
    /// Draws a new task. Deterministic in `seed`.
    fn resample_task(&mut self, seed: u64);
    /// Small integer naming the current task, for logs.
    fn task_id(&self) -> usize {
        0
    }
}

/// Environment selection and geometry, as read from a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnvConfig {
    MovementBandits(MovementBanditsConfig),
    PointReach(PointReachConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::MovementBandits(MovementBanditsConfig::default())
    }
}

impl EnvConfig {
    /// Looks up an environment by name with default geometry.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "movement_bandits" => Some(EnvConfig::MovementBandits(MovementBanditsConfig::default())),
            "point_reach" => Some(EnvConfig::PointReach(PointReachConfig::default())),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::MovementBandits(_) => "movement_bandits",
            EnvConfig::PointReach(_) => "point_reach",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvConfig::MovementBandits(c) => c.validate(),
            EnvConfig::PointReach(c) => c.validate(),
        }
    }

    /// Builds the environment with its task drawn from `task_seed`.
    pub fn build(&self, task_seed: u64) -> Result<Box<dyn Env + Send>> {
        Ok(match self {
            EnvConfig::MovementBandits(c) => Box::new(MovementBandits::new(c.clone(), task_seed)?),
            EnvConfig::PointReach(c) => Box::new(PointReach::new(c.clone(), task_seed)?),
        })
    }
}
