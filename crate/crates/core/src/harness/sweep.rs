//! Runs the same config over a grid of regularizer strengths and seeds.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::TrainConfig;
use super::metrics::MetricRow;
use super::train::train;
use crate::error::Result;

pub const ALPHA_GRID: [f64; 5] = [0.2, 0.3, 0.4, 0.5, 0.6];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub alpha: f64,
    pub seed: u64,
    pub run_id: String,
    /// Mean average return over the last `tail` updates.
    pub final_return: f64,
    /// Mean pairwise distance estimate over the last `tail` updates.
    pub final_wd: Option<f64>,
    pub run_dir: PathBuf,
}

/// Means of the per-update return and of every logged pairwise distance
/// over the last `tail` rows.
pub fn tail_summary(rows: &[MetricRow], tail: usize) -> (f64, Option<f64>) {
    let rows = &rows[rows.len().saturating_sub(tail)..];
    if rows.is_empty() {
        return (0.0, None);
    }
    let ret = rows.iter().map(|r| r.avg_return).sum::<f64>() / rows.len() as f64;
    let wds: Vec<f64> = rows.iter().flat_map(|r| r.wd.iter().flatten().flatten().copied()).collect();
    let wd = (!wds.is_empty()).then(|| wds.iter().sum::<f64>() / wds.len() as f64);
    (ret, wd)
}

/// Trains one run per `(alpha, seed)` under `out_dir/alpha_<a>/seed_<s>`,
/// in parallel when `parallel` is set, and writes `out_dir/sweep.csv`.
/// Results come back in grid order whatever the scheduling.
pub fn sweep(base: &TrainConfig, alphas: &[f64], seeds: &[u64], out_dir: &Path, tail: usize, parallel: bool) -> Result<Vec<SweepResult>> {
    let jobs: Vec<(f64, u64)> = alphas.iter().flat_map(|&a| seeds.iter().map(move |&s| (a, s))).collect();
    let run = |&(alpha, seed): &(f64, u64)| -> Result<SweepResult> {
        let mut cfg = base.clone();
        cfg.agent.alpha = alpha;
        cfg.seed = seed;
        cfg.out_dir = out_dir.join(format!("alpha_{alpha}")).join(format!("seed_{seed}"));
        cfg.validate()?;
        let summary = train(&cfg)?;
        let (final_return, final_wd) = tail_summary(&summary.rows, tail);
        Ok(SweepResult { alpha, seed, run_id: summary.run_id, final_return, final_wd, run_dir: cfg.out_dir })
    };
    let results: Vec<SweepResult> = if parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    std::fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("sweep.csv"))?;
    for r in &results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(results)
}
