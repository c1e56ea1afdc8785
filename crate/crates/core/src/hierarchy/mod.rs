//! Two-level agent: a master choosing among subpolicies, the diversity
//! regularizer, and clipped-surrogate updates.

mod agent;
mod buffer;
mod ppo;
mod wder;

pub use agent::{ActorCritic, AgentConfig, HierAgent};
pub(crate) use agent::derive_seed;
pub use buffer::{gae, gae_with_discounts, MasterRecord, RolloutBuffer, StepRecord};
pub use ppo::{ppo_update_master, ppo_update_subpolicy, PpoParams, Regularizer, UpdateStats};
pub use wder::{pair_wd, wd_min, wder_gradient, wder_objective, PairEstimate, RegularizerSetup, WdMin, WderCache};
