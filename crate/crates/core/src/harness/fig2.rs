//! Two point masses, one at 0 and one at theta: the transport distance grows
//! with theta while the JS divergence jumps to ln 2 and stays there.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ot::{exact_wd_discrete, js_divergence_categorical, DiscreteMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Row {
    pub theta: f64,
    pub wd: f64,
    pub js: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn fig2_demo(thetas: &[f64]) -> Result<Vec<Fig2Row>> {
    thetas
        .iter()
        .map(|&theta| {
            if !(theta >= 0.0) || !theta.is_finite() {
                return Err(Error::Domain(format!("theta must be finite and >= 0, got {theta}")));
            }
            let p = DiscreteMeasure::dirac(vec![0.0]);
            let q = DiscreteMeasure::dirac(vec![theta]);
            let wd = exact_wd_discrete(&p, &q, euclidean)?;
            // Both measures as probability vectors over the joint support.
            let js = if theta == 0.0 {
                js_divergence_categorical(&[1.0], &[1.0])?
            } else {
                js_divergence_categorical(&[1.0, 0.0], &[0.0, 1.0])?
            };
            Ok(Fig2Row { theta, wd, js })
        })
        .collect()
}

pub fn write_fig2_csv(rows: &[Fig2Row], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
