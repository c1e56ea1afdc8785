//! Training orchestration, run outputs, and the demonstration commands.

mod config;
mod fig2;
mod metrics;
mod plot;
mod selfcheck;
mod sweep;
mod train;
mod transfer;

pub use config::{Overrides, TrainConfig, TransferConfig};
pub use fig2::{fig2_demo, write_fig2_csv, Fig2Row};
pub use metrics::{metric_columns, MetricRow, MetricsTable, MetricsWriter, RunManifest, SubpolicyRow};
pub use plot::{load_series, render_svg, smooth, Series, DEFAULT_WINDOW};
pub use selfcheck::{estimate_vs_exact, random_points, wd_selfcheck, CheckResult, SelfCheckConfig, SelfCheckReport};
pub use sweep::{sweep, tail_summary, SweepResult, ALPHA_GRID};
pub use train::{collect_rollouts, embedded_action_dim, task_seed, train, update_state_set, RunPaths, RunSummary, Trainer};
pub use transfer::{running_mean, transfer_eval, updates_to_plateau, TransferReport};
