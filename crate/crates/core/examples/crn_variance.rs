//! Spread of the pairwise distance estimate over sampling seeds, with both
//! policies drawing from one noise stream vs from separate streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wder::embedding::{sample_action_pairs, sample_action_pairs_independent, CrnStream, StateSet};
use wder::neural::{HeadKind, PolicyNet};
use wder::ot::{estimate_wd, fit_potentials_embedded, sample_product_pairs, OtParams, ProductSampler, RandomFeatureMap};

fn main() -> wder::Result<()> {
    let head = HeadKind::Gaussian { dim: 2 };
    let a = PolicyNet::new(3, &[16, 16], head, -0.5, 1);
    let mut b = a.clone();
    let n = b.param_count();
    for shift in &mut b.params_mut()[n - 4..n - 2] {
        *shift += 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let states = StateSet::new((0..12).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(), (0, 1))?;
    let map = RandomFeatureMap::new(2, 64, 1.0, 3)?;
    let ot = OtParams { rounds: 300, ..OtParams::default() };
    let estimate = |xs: &[Vec<f64>], ys: &[Vec<f64>], seed: u64| -> wder::Result<f64> {
        let (ex, ey) = (map.embed(xs)?, map.embed(ys)?);
        let pot = fit_potentials_embedded(&mut ProductSampler::new(&ex, &ey)?, map.features(), &ot, seed)?;
        let pairs = sample_product_pairs(&ex, &ey, ot.eval_samples, &mut ChaCha8Rng::seed_from_u64(seed + 1))?;
        estimate_wd(&pot, &pairs, &ot)
    };
    let (mut shared, mut separate) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let s = sample_action_pairs(&a, &b, &states, 8, &mut CrnStream::new(seed), 0.5)?;
        shared.push(estimate(&s.actions_k, &s.actions_l, 50 + seed)?);
        let s = sample_action_pairs_independent(&a, &b, &states, 8, &mut CrnStream::new(seed), &mut CrnStream::new(seed + 99), 0.5)?;
        separate.push(estimate(&s.actions_k, &s.actions_l, 50 + seed)?);
    }
    for (name, xs) in [("shared", &shared), ("separate", &separate)] {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        println!("{name:>8}: mean {m:.4} variance {v:.3e}");
    }
    Ok(())
}
