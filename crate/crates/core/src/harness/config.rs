use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingParams;
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::hierarchy::{AgentConfig, PpoParams};
use crate::ot::OtParams;

/// Master-only adaptation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    /// Master updates to run.
    pub updates: usize,
    /// Fraction of the plateau that counts as adapted.
    pub plateau_fraction: f64,
    /// Trailing updates averaged to define the plateau, and window of the
    /// running mean compared against it.
    pub window: usize,
    /// Adapt on the task the checkpoint was trained on instead of a new one.
    pub same_task: bool,
    pub freeze_subpolicies: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self { updates: 60, plateau_fraction: 0.9, window: 5, same_task: false, freeze_subpolicies: true }
    }
}

/// Everything a training run needs. Read from and written as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub total_timesteps: u64,
    /// Whole episodes collected per update.
    pub episodes_per_update: usize,
    /// Estimate subpolicy distances at all. When false the regularizer code
    /// is never entered, whatever `agent.alpha` says.
    pub regularizer: bool,
    /// Draw a new task every this many updates (0 = never).
    pub task_resample_every: usize,
    /// Reinitialize the master whenever the task is redrawn.
    pub reset_master_on_resample: bool,
    /// A subpolicy unselected for longer than this many updates gets no
    /// regularizer step.
    pub recent_window: usize,
    /// Write a checkpoint every this many updates (0 = only at the end).
    pub checkpoint_every: usize,
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub ppo: PpoParams,
    pub ot: OtParams,
    pub embedding: EmbeddingParams,
    pub transfer: TransferConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_timesteps: 200_000,
            episodes_per_update: 8,
            regularizer: true,
            task_resample_every: 25,
            reset_master_on_resample: false,
            recent_window: 5,
            checkpoint_every: 100,
            out_dir: PathBuf::from("runs/default"),
            env: EnvConfig::default(),
            // sparse-reward bandit settings; the regularizer saturates
            // both subpolicies into fixed actions with smaller entropy
            agent: AgentConfig { policy_lr: 1e-3, ..AgentConfig::default() },
            ppo: PpoParams { minibatch: 64, entropy_coef: 0.05, normalize_advantages: false, ..PpoParams::default() },
            ot: OtParams::default(),
            embedding: EmbeddingParams::default(),
            transfer: TransferConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub env: Option<String>,
    pub out_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(alpha) = o.alpha {
            self.agent.alpha = alpha;
        }
        if let Some(name) = &o.env {
            if name != self.env.name() {
                self.env = EnvConfig::by_name(name).ok_or_else(|| Error::Config(format!("unknown environment {name:?}")))?;
            }
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.ppo.validate()?;
        self.ot.validate()?;
        self.embedding.validate()?;
        if self.episodes_per_update == 0 {
            return Err(Error::Config("episodes_per_update must be >= 1".into()));
        }
        let t = &self.transfer;
        if t.window == 0 || !(t.plateau_fraction > 0.0 && t.plateau_fraction <= 1.0) {
            return Err(Error::Config("transfer window must be >= 1 and plateau_fraction in (0, 1]".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form with the output directory
    /// blanked, as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        Ok(hex(&Sha256::digest(c.to_toml_string()?.as_bytes())))
    }

    /// Short identifier of this (config, seed) pair.
    pub fn run_id(&self) -> Result<String> {
        Ok(self.hash()?[..12].to_string())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = TrainConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(TrainConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = TrainConfig::from_toml_str("seed = 4\n[agent]\nalpha = 0.3\n[env]\nname = \"point_reach\"\nhorizon = 20\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.agent.alpha, 0.3);
        assert_eq!(cfg.agent.k, 2);
        match cfg.env {
            EnvConfig::PointReach(p) => assert_eq!(p.horizon, 20),
            _ => panic!("wrong env"),
        }
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(TrainConfig::from_toml_str("[ot]\nsmoothing = -1.0\n"), Err(Error::Config(_))));
        assert!(matches!(TrainConfig::from_toml_str("[agent]\nk = 1\nalpha = 0.5\n"), Err(Error::Config(_))));
        assert!(matches!(TrainConfig::from_toml_str("seed = \"x\""), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = TrainConfig::default();
        cfg.apply(&Overrides { seed: Some(9), alpha: Some(0.2), env: Some("point_reach".into()), out_dir: Some("x".into()) })
            .unwrap();
        assert_eq!((cfg.seed, cfg.agent.alpha, cfg.env.name()), (9, 0.2, "point_reach"));
        assert!(cfg.apply(&Overrides { env: Some("nope".into()), ..Overrides::default() }).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
