//! Scripted controllers on both environments: a greedy walker that knows
//! which MovementBandits target pays, and a clipped pursuit controller on
//! PointReach compared with its best achievable return.

use wder::envs::{Env, MbAction, MovementBandits, MovementBanditsConfig, PointReach, PointReachConfig};
use wder::neural::Action;

fn main() -> wder::Result<()> {
    let mut mb = MovementBandits::new(MovementBanditsConfig::default(), 3)?;
    for episode in 0..3 {
        mb.reset(episode);
        let goal = mb.targets()[mb.correct_index()];
        let mut total = 0.0;
        loop {
            let [x, y] = mb.agent_position();
            let (dx, dy) = (goal[0] - x, goal[1] - y);
            let a = if dx.abs() >= dy.abs() && dx.abs() > 0.0 {
                if dx > 0.0 { MbAction::Right } else { MbAction::Left }
            } else if dy != 0.0 {
                if dy > 0.0 { MbAction::Up } else { MbAction::Down }
            } else {
                MbAction::Stay
            };
            let step = mb.step_move(a);
            total += step.reward;
            if step.done {
                break;
            }
        }
        println!("movement bandits episode {episode}: correct target {}, return {total}", mb.correct_index());
    }

    let cfg = PointReachConfig::default();
    let mut pr = PointReach::new(cfg.clone(), 7)?;
    pr.reset(1);
    let (start, goal) = (pr.position(), pr.goal());
    let mut total = 0.0;
    loop {
        let p = pr.position();
        let v: Vec<f64> = (0..2).map(|i| (goal[i] - p[i]).clamp(-cfg.max_speed, cfg.max_speed)).collect();
        let step = pr.step(&Action::Continuous(v))?;
        total += step.reward;
        if step.done {
            break;
        }
    }
    println!("point reach: return {total:.3}, best possible {:.3}", PointReach::optimal_return(&cfg, start, goal));
    Ok(())
}
