//! Small feedforward actor-critic networks with hand-written reverse-mode
//! gradients, categorical and diagonal-Gaussian heads, and Adam.

mod checkpoint;
mod dist;
mod mlp;
mod optim;
mod policy;

pub use checkpoint::{ArrayInfo, Checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC};
pub use dist::{one_hot, softmax, Action, DistGrad, DistParams};
pub use mlp::{Mlp, MlpCache};
pub use optim::{clip_grad_norm, opt_step, OptState};
pub use policy::{HeadKind, PolicyCache, PolicyNet, ValueCache, ValueNet};
