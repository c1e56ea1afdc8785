use crate::error::{Error, Result};

fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain("probabilities must be finite and nonnegative".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Jensen-Shannon divergence (natural log) between two categorical
/// distributions on the same support. Lies in `[0, ln 2]`.
pub fn js_divergence_categorical(p: &[f64], q: &[f64]) -> Result<f64> {
    check_simplex(p)?;
    check_simplex(q)?;
    if p.len() != q.len() {
        return Err(Error::Domain(format!("support sizes differ: {} vs {}", p.len(), q.len())));
    }
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            js += 0.5 * b * (b / m).ln();
        }
    }
    Ok(js.clamp(0.0, std::f64::consts::LN_2))
}
