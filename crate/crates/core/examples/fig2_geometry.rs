//! Wasserstein distance vs Jensen-Shannon divergence between a point mass
//! at 0 and one at theta. The first tracks theta; the second is flat.

use wder::harness::fig2_demo;

fn main() -> wder::Result<()> {
    let rows = fig2_demo(&[0.0, 0.25, 0.5, 1.0, 2.0, 4.0])?;
    println!("{:>6} {:>8} {:>8}", "theta", "wd", "js");
    for r in rows {
        println!("{:>6.2} {:>8.4} {:>8.4}", r.theta, r.wd, r.js);
    }
    Ok(())
}
