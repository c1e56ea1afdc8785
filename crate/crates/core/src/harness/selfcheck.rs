//! Estimator-versus-oracle battery.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hierarchy::derive_seed;
use crate::ot::{
    cost, estimate_wd, exact_wd_1d, exact_wd_discrete, exact_wd_permutations, fit_potentials_embedded, sample_product_pairs,
    DiscreteMeasure, OtParams, ProductSampler, RandomFeatureMap,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfCheckConfig {
    pub seed: u64,
    /// Random measure pairs per check.
    pub trials: usize,
    /// Points per measure.
    pub points: usize,
    /// Points are drawn uniformly from `[0, spread]^2`.
    pub spread: f64,
    pub features: usize,
    pub bandwidth: f64,
    pub ot: OtParams,
    /// Relative tolerance against the exact oracle, with `abs_floor` as the
    /// absolute tolerance when it is larger.
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Smoothing values for the bias sweep, largest first.
    pub sweep: Vec<f64>,
}

impl Default for SelfCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10,
            points: 5,
            spread: 10.0,
            features: 128,
            bandwidth: 1.0,
            ot: OtParams { smoothing: 0.05, step_size: 0.05, rounds: 2000, eval_samples: 1024, minibatch: 16, ..OtParams::default() },
            rel_tol: 0.10,
            abs_floor: 0.02,
            sweep: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheckReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Fits potentials between the embedded point sets and returns the
/// estimate together with the exact transport cost between the same
/// embedded points.
pub fn estimate_vs_exact(
    map: &RandomFeatureMap,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    ot: &OtParams,
    seed: u64,
) -> Result<(f64, f64)> {
    let ex = map.embed(xs)?;
    let ey = map.embed(ys)?;
    let exact = exact_wd_discrete(&DiscreteMeasure::uniform(ex.clone())?, &DiscreteMeasure::uniform(ey.clone())?, |a, b| {
        cost(a, b).unwrap_or(f64::NAN)
    })?;
    let pot = fit_potentials_embedded(&mut ProductSampler::new(&ex, &ey)?, map.features(), ot, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let pairs = sample_product_pairs(&ex, &ey, ot.eval_samples, &mut rng)?;
    Ok((estimate_wd(&pot, &pairs, ot)?, exact))
}

pub fn random_points(n: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![rng.random::<f64>() * spread, rng.random::<f64>() * spread]).collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

fn check(name: &str, passed: bool, measured: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, measured, tolerance, detail }
}

pub fn wd_selfcheck(cfg: &SelfCheckConfig) -> Result<SelfCheckReport> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let beta = cfg.ot.smoothing;

    // identical measures
    let xs = random_points(cfg.points, cfg.spread, &mut rng);
    let map = RandomFeatureMap::new(2, cfg.features, cfg.bandwidth, derive_seed(cfg.seed, 1))?;
    let (est, _) = estimate_vs_exact(&map, &xs, &xs, &cfg.ot, derive_seed(cfg.seed, 2))?;
    let bound = beta * (cfg.points as f64).ln().max(1.0);
    checks.push(check(
        "identical_measures",
        est.abs() <= bound,
        est.abs(),
        bound,
        format!("estimate {est:.5} for a measure against itself"),
    ));

    // estimator against the transport oracle
    let mut worst = 0.0f64;
    let mut rel_errors = Vec::new();
    for t in 0..cfg.trials {
        let map = RandomFeatureMap::new(2, cfg.features, cfg.bandwidth, derive_seed(cfg.seed, 100 + t as u64))?;
        let xs = random_points(cfg.points, cfg.spread, &mut rng);
        let ys = random_points(cfg.points, cfg.spread, &mut rng);
        let (est, exact) = estimate_vs_exact(&map, &xs, &ys, &cfg.ot, derive_seed(cfg.seed, 200 + t as u64))?;
        let tol = (cfg.rel_tol * exact.abs()).max(cfg.abs_floor);
        worst = worst.max((est - exact).abs() / tol);
        rel_errors.push((est - exact) / exact);
    }
    checks.push(check(
        "estimator_vs_lp",
        worst <= 1.0,
        worst,
        1.0,
        format!("worst error as a fraction of tolerance; relative errors {rel_errors:.3?}"),
    ));

    // permutation enumeration against the flow solver
    let mut gap = 0.0f64;
    for _ in 0..cfg.trials {
        let n = rng.random_range(1..=6);
        let p = DiscreteMeasure::uniform(random_points(n, cfg.spread, &mut rng))?;
        let q = DiscreteMeasure::uniform(random_points(n, cfg.spread, &mut rng))?;
        let c = |a: &[f64], b: &[f64]| cost(a, b).unwrap_or(f64::NAN);
        gap = gap.max((exact_wd_discrete(&p, &q, c)? - exact_wd_permutations(&p, &q, c)?).abs());
    }
    checks.push(check("permutation_vs_lp", gap <= 1e-9, gap, 1e-9, "max absolute disagreement".into()));

    // 1-D quantile coupling against the flow solver
    let mut gap = 0.0f64;
    for _ in 0..cfg.trials {
        let n = rng.random_range(1..=8);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * cfg.spread).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * cfg.spread).collect();
        let p = DiscreteMeasure::uniform(xs.iter().map(|&x| vec![x]).collect())?;
        let q = DiscreteMeasure::uniform(ys.iter().map(|&y| vec![y]).collect())?;
        for power in [1u32, 2] {
            let lp = exact_wd_discrete(&p, &q, |a, b| (a[0] - b[0]).abs().powi(power as i32))?;
            gap = gap.max((lp - exact_wd_1d(&xs, &ys, power)?).abs());
        }
    }
    checks.push(check("quantile_vs_lp", gap <= 1e-9, gap, 1e-9, "max absolute disagreement, powers 1 and 2".into()));

    // Gaussian closed form: W2^2 between N(m1, s1^2) and N(m2, s2^2) is (m1-m2)^2 + (s1-s2)^2
    let (m1, s1, m2, s2) = (0.0, 1.0, 1.5, 0.5);
    let n = 20_000;
    let a = Normal::new(m1, s1).expect("valid normal");
    let b = Normal::new(m2, s2).expect("valid normal");
    let xs: Vec<f64> = (0..n).map(|_| a.sample(&mut rng)).collect();
    let ys: Vec<f64> = (0..n).map(|_| b.sample(&mut rng)).collect();
    let closed = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
    let empirical = exact_wd_1d(&xs, &ys, 2)?;
    let rel = (empirical - closed).abs() / closed;
    checks.push(check(
        "gaussian_closed_form",
        rel <= 0.05,
        rel,
        0.05,
        format!("quantile coupling on {n} samples gives {empirical:.4}, closed form {closed:.4}"),
    ));

    // smaller smoothing, smaller bias
    let mut medians = Vec::new();
    for &s in &cfg.sweep {
        let ot = OtParams { smoothing: s, ..cfg.ot };
        let mut r = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 300));
        let mut biases = Vec::new();
        for t in 0..cfg.trials {
            let map = RandomFeatureMap::new(2, cfg.features, cfg.bandwidth, derive_seed(cfg.seed, 400 + t as u64))?;
            let xs = random_points(cfg.points, cfg.spread, &mut r);
            let ys = random_points(cfg.points, cfg.spread, &mut r);
            let (est, exact) = estimate_vs_exact(&map, &xs, &ys, &ot, derive_seed(cfg.seed, 500 + t as u64))?;
            biases.push((est - exact).abs());
        }
        medians.push(median(biases));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    checks.push(check(
        "smoothing_sweep",
        decreasing,
        *medians.last().unwrap_or(&f64::NAN),
        0.0,
        format!("median |bias| at smoothing {:?}: {medians:.4?}", cfg.sweep),
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(SelfCheckReport { checks, passed })
}
