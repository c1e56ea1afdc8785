//! Two nearly identical Gaussian subpolicies pushed apart by the
//! regularizer gradient alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wder::embedding::{EmbeddingParams, StateSet};
use wder::hierarchy::{wd_min, wder_gradient, AgentConfig, HierAgent, RegularizerSetup};
use wder::neural::{opt_step, DistParams, HeadKind, OptState};
use wder::ot::{OtParams, RandomFeatureMap};

fn mean_gap(a: &HierAgent, states: &StateSet) -> wder::Result<f64> {
    let mut total = 0.0;
    for s in states.states() {
        let mean = |k: usize| -> wder::Result<f64> {
            match a.subpolicies[k].policy.forward(s)?.0 {
                DistParams::Gaussian { mean, .. } => Ok(mean[0]),
                DistParams::Categorical { .. } => unreachable!(),
            }
        };
        total += (mean(0)? - mean(1)?).abs();
    }
    Ok(total / states.len() as f64)
}

fn main() -> wder::Result<()> {
    let cfg = AgentConfig { k: 2, hidden: vec![16, 16], ..AgentConfig::default() };
    let mut agent = HierAgent::new(3, HeadKind::Gaussian { dim: 1 }, cfg, 4)?;
    let p0 = agent.subpolicies[0].policy.params().to_vec();
    agent.subpolicies[1].policy.params_mut().copy_from_slice(&p0);
    let n = p0.len();
    agent.subpolicies[1].policy.params_mut()[n - 2] += 0.01;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let states = StateSet::new((0..10).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(), (0, 1))?;
    let mut opt = OptState::new(n, 1e-2);
    for step in 0..=100u64 {
        let setup = RegularizerSetup {
            map: RandomFeatureMap::new(1, 64, 1.0, step)?,
            ot: OtParams { rounds: 200, ..OtParams::default() },
            embedding: EmbeddingParams::default(),
            seed: step,
        };
        let r = wd_min(0, &agent, &states, &setup)?;
        if step % 20 == 0 {
            println!("step {step:>3}: distance estimate {:.4}, mean action gap {:.4}", r.value, mean_gap(&agent, &states)?);
        }
        let g = wder_gradient(&agent, &r.cache, 1.0)?;
        let mut params = agent.subpolicies[0].policy.params().to_vec();
        opt_step(&mut params, &g, &mut opt)?;
        agent.subpolicies[0].policy.params_mut().copy_from_slice(&params);
    }
    Ok(())
}
