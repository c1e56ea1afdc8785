//! Dual-SGD distance estimates against the exact transport cost for a few
//! random pairs of small point clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wder::harness::{estimate_vs_exact, random_points};
use wder::ot::{OtParams, RandomFeatureMap};

fn main() -> wder::Result<()> {
    let ot = OtParams { smoothing: 0.05, step_size: 0.05, rounds: 2000, eval_samples: 1024, minibatch: 16, ..OtParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>3} {:>3} {:>9} {:>9} {:>8}", "|x|", "|y|", "estimate", "exact", "rel err");
    for i in 0..8 {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let xs = random_points(n, 10.0, &mut rng);
        let ys = random_points(m, 10.0, &mut rng);
        let map = RandomFeatureMap::new(2, 128, 1.0, 100 + i)?;
        let (est, exact) = estimate_vs_exact(&map, &xs, &ys, &ot, 200 + i)?;
        println!("{n:>3} {m:>3} {est:>9.4} {exact:>9.4} {:>8.3}", (est - exact) / exact);
    }
    Ok(())
}
