use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wder::harness::{
    fig2_demo, load_series, render_svg, sweep, transfer_eval, wd_selfcheck, write_fig2_csv, Overrides, SelfCheckConfig, TrainConfig, Trainer,
    ALPHA_GRID, DEFAULT_WINDOW,
};
use wder::{Error, Result};

#[derive(Parser)]
#[command(name = "wder", version, about = "Hierarchical RL with a Wasserstein diversity regularizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// movement_bandits or point_reach
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        cfg.apply(&Overrides { seed: self.seed, alpha: self.alpha, env: self.env.clone(), out_dir: self.out_dir.clone() })?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a hierarchical agent.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint written by an earlier run of the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many updates.
        #[arg(long)]
        max_updates: Option<usize>,
    },
    /// Freeze subpolicies from a checkpoint and adapt a fresh master on a new task.
    TransferEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Wasserstein vs Jensen-Shannon on two shifted point masses.
    Fig2 {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 1.0, 2.0])]
        thetas: Vec<f64>,
        #[arg(long, default_value = "runs/fig2")]
        out_dir: PathBuf,
    },
    /// Check the distance estimator against exact solvers.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train over a grid of regularizer strengths and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2])]
        seeds: Vec<u64>,
        /// Updates averaged for the final return and distance.
        #[arg(long, default_value_t = 20)]
        tail: usize,
        #[arg(long)]
        parallel: bool,
    },
    /// Render metrics.csv files as an SVG line chart.
    Plot {
        /// label=path pairs, or plain paths.
        #[arg(required = true)]
        runs: Vec<String>,
        #[arg(long, default_value = "timestep")]
        x: String,
        #[arg(long, default_value = "avg_return")]
        y: String,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) => e.exit(),
        Err(e) => {
            let _ = writeln!(std::io::stdout(), "{}", json!({ "error": "usage", "message": e.to_string().trim() }));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(out) => {
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&out).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stdout(), "{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::Train { common, resume, max_updates } => {
            let cfg = common.load()?;
            let mut trainer = match resume {
                Some(ck) => Trainer::resume(cfg, &ck)?,
                None => Trainer::new(cfg)?,
            };
            let s = trainer.run(max_updates)?;
            Ok(json!({
                "run_id": s.run_id,
                "updates": s.updates,
                "timesteps": s.timesteps,
                "dir": s.paths.dir,
                "final_checkpoint": s.final_checkpoint,
            }))
        }
        Command::TransferEval { common, checkpoint } => {
            let cfg = common.load()?;
            let r = transfer_eval(&checkpoint, &cfg)?;
            Ok(json!({
                "run_id": r.run_id,
                "task": r.task,
                "plateau": r.plateau,
                "updates_to_plateau": r.updates_to_plateau,
                "dir": cfg.out_dir,
            }))
        }
        Command::Fig2 { thetas, out_dir } => {
            let rows = fig2_demo(&thetas)?;
            std::fs::create_dir_all(&out_dir)?;
            let path = out_dir.join("fig2.csv");
            write_fig2_csv(&rows, &path)?;
            Ok(json!({ "rows": rows, "csv": path }))
        }
        Command::Selfcheck { seed, out_dir } => {
            let report = wd_selfcheck(&SelfCheckConfig { seed, ..Default::default() })?;
            let value = serde_json::to_value(&report)?;
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("selfcheck.json"), serde_json::to_string_pretty(&value)?)?;
            }
            if !report.passed {
                return Err(Error::Estimation(format!("selfcheck failed: {}", serde_json::to_string(&value)?)));
            }
            Ok(value)
        }
        Command::Sweep { common, alphas, seeds, tail, parallel } => {
            let base = common.load()?;
            let alphas = alphas.unwrap_or_else(|| ALPHA_GRID.to_vec());
            let out = base.out_dir.clone();
            let results = sweep(&base, &alphas, &seeds, &out, tail, parallel)?;
            Ok(json!({ "results": results, "csv": out.join("sweep.csv") }))
        }
        Command::Plot { runs, x, y, window, out } => {
            let files: Vec<(String, PathBuf)> = runs
                .iter()
                .map(|r| match r.split_once('=') {
                    Some((label, path)) => (label.to_string(), metrics_path(Path::new(path))),
                    None => (r.clone(), metrics_path(Path::new(r))),
                })
                .collect();
            let refs: Vec<(String, &Path)> = files.iter().map(|(l, p)| (l.clone(), p.as_path())).collect();
            let series = load_series(&refs, &x, &y, window)?;
            std::fs::write(&out, render_svg(&series, &y, &x, &y)?)?;
            Ok(json!({ "svg": out, "series": series.len() }))
        }
    }
}

/// Accepts either a run directory or the metrics file itself.
fn metrics_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("metrics.csv")
    } else {
        p.to_path_buf()
    }
}
