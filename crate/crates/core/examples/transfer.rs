//! Trains briefly, then freezes the subpolicies and adapts a fresh master
//! on a new task, printing the adaptation curve.

use wder::harness::{train, transfer_eval, TrainConfig};

fn main() -> wder::Result<()> {
    let mut cfg = TrainConfig::default();
    cfg.total_timesteps = 30_000;
    cfg.agent.alpha = 0.5;
    cfg.out_dir = "runs/example_transfer/train".into();
    let run = train(&cfg)?;

    let mut tcfg = cfg.clone();
    tcfg.transfer.updates = 30;
    tcfg.out_dir = "runs/example_transfer/adapt".into();
    let report = transfer_eval(&run.final_checkpoint, &tcfg)?;
    println!("new task {}: plateau {:.2} reached (90%) after {} updates", report.task, report.plateau, report.updates_to_plateau);
    for (i, r) in report.curve.iter().enumerate().step_by(5) {
        println!("  update {i:>3}: return {r:.2}");
    }
    Ok(())
}
