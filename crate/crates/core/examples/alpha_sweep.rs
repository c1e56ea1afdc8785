//! A small regularizer-strength sweep on PointReach; writes sweep.csv.

use wder::envs::EnvConfig;
use wder::harness::{sweep, TrainConfig};

fn main() -> wder::Result<()> {
    let mut base = TrainConfig::default();
    base.env = EnvConfig::by_name("point_reach").expect("known environment");
    base.total_timesteps = 8_000;
    let out = std::path::Path::new("runs/example_sweep");
    for r in sweep(&base, &[0.0, 0.2, 0.5], &[0, 1], out, 5, true)? {
        println!("alpha {:.1} seed {}: return {:>8.2} distance {:?}", r.alpha, r.seed, r.final_return, r.final_wd);
    }
    println!("table in {}", out.join("sweep.csv").display());
    Ok(())
}
