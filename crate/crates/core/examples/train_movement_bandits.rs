//! Trains the hierarchical agent on MovementBandits with and without the
//! regularizer and prints return and subpolicy distance over training.
//!
//!     cargo run --release --example train_movement_bandits -- [timesteps] [seed]

use wder::harness::{tail_summary, train, TrainConfig};

fn main() -> wder::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(40_000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    for alpha in [0.0, 0.5] {
        let mut cfg = TrainConfig::default();
        cfg.total_timesteps = steps;
        cfg.seed = seed;
        cfg.agent.alpha = alpha;
        cfg.out_dir = format!("runs/example_mb/alpha_{alpha}").into();
        let run = train(&cfg)?;
        println!("alpha {alpha}: run {} in {}", run.run_id, run.paths.dir.display());
        for chunk in run.rows.chunks(run.rows.len().div_ceil(8).max(1)) {
            let (ret, wd) = tail_summary(chunk, chunk.len());
            let last = chunk.last().expect("chunks are non-empty");
            println!("  up to step {:>7}: return {ret:>6.2}  distance {}", last.timestep, wd.map_or("-".into(), |w| format!("{w:.4}")));
        }
    }
    Ok(())
}
