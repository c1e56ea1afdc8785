pub mod embedding;
pub mod envs;
pub mod harness;
pub mod error;
pub mod hierarchy;
pub mod neural;
pub mod ot;

pub use error::{Error, Result};
