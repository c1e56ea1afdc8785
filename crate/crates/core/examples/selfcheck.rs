//! Runs the estimator self-check battery and prints each check.

use wder::harness::{wd_selfcheck, SelfCheckConfig};

fn main() -> wder::Result<()> {
    let report = wd_selfcheck(&SelfCheckConfig::default())?;
    for c in &report.checks {
        println!("{:<22} {} measured {:.4} tolerance {:.4}  {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.measured, c.tolerance, c.detail);
    }
    println!("all passed: {}", report.passed);
    Ok(())
}
