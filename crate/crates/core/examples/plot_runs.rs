//! Trains two short runs and renders their smoothed return curves as SVG.

use std::path::Path;

use wder::harness::{load_series, render_svg, train, TrainConfig};

fn main() -> wder::Result<()> {
    let mut files = Vec::new();
    for alpha in [0.0, 0.5] {
        let mut cfg = TrainConfig::default();
        cfg.total_timesteps = 20_000;
        cfg.agent.alpha = alpha;
        cfg.out_dir = format!("runs/example_plot/alpha_{alpha}").into();
        files.push((format!("alpha {alpha}"), train(&cfg)?.paths.metrics));
    }
    let refs: Vec<(String, &Path)> = files.iter().map(|(l, p)| (l.clone(), p.as_path())).collect();
    let series = load_series(&refs, "timestep", "avg_return", 10)?;
    let out = Path::new("runs/example_plot/returns.svg");
    std::fs::write(out, render_svg(&series, "MovementBandits return", "timestep", "avg_return")?)?;
    println!("wrote {}", out.display());
    Ok(())
}
