//! Entropic-dual Wasserstein estimation with potentials that are linear in
//! random features, fitted by stochastic gradient ascent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::RandomFeatureMap;
use crate::error::{check_dim, Error, Result};

/// Which integrand the estimator averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DualForm {
    /// `mu(x) - nu(y) - s * exp((mu(x) - nu(y) - c) / s)`
    #[default]
    Smoothed,
    /// `mu(x) - nu(y) - exp((mu(x) - nu(y) - c) / s) / s`
    ExpOverSmoothing,
}

/// Optimal-transport estimation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtParams {
    /// Entropic smoothing strength.
    pub smoothing: f64,
    /// SGD step size.
    pub step_size: f64,
    /// Number of SGD rounds.
    pub rounds: usize,
    /// Sample pairs used by the estimator.
    pub eval_samples: usize,
    /// Sample pairs averaged per SGD round.
    pub minibatch: usize,
    /// Exponent arguments are clamped to `[-max_exponent, max_exponent]`.
    pub max_exponent: f64,
    pub form: DualForm,
}

impl Default for OtParams {
    fn default() -> Self {
        Self {
            smoothing: 0.1,
            step_size: 0.01,
            rounds: 500,
            eval_samples: 256,
            minibatch: 1,
            max_exponent: 30.0,
            form: DualForm::Smoothed,
        }
    }
}

impl OtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Config(format!("smoothing must be > 0, got {}", self.smoothing)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be > 0, got {}", self.step_size)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.eval_samples == 0 {
            return Err(Error::Config("eval_samples must be >= 1".into()));
        }
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch must be >= 1".into()));
        }
        if !(self.max_exponent > 0.0) {
            return Err(Error::Config("max_exponent must be > 0".into()));
        }
        Ok(())
    }
}

/// Dual vectors defining `mu(x) = p_mu . phi(x)` and `nu(y) = p_nu . phi(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub p_mu: Vec<f64>,
    pub p_nu: Vec<f64>,
    pub rounds_run: usize,
    /// Minibatch dual objective observed at each round, before the update.
    pub objective_trace: Vec<f64>,
    /// Number of exponent evaluations that hit the clamp.
    pub clamp_events: usize,
}

impl DualPotentials {
    pub fn zeros(features: usize) -> Self {
        Self {
            p_mu: vec![0.0; features],
            p_nu: vec![0.0; features],
            rounds_run: 0,
            objective_trace: Vec::new(),
            clamp_events: 0,
        }
    }

    pub fn features(&self) -> usize {
        self.p_mu.len()
    }

    pub fn mu(&self, phi_x: &[f64]) -> f64 {
        dot(&self.p_mu, phi_x)
    }

    pub fn nu(&self, phi_y: &[f64]) -> f64 {
        dot(&self.p_nu, phi_y)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean ground cost.
pub fn cost(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(sq_dist(x, y))
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Clamped exponent argument `(mu - nu - c) / s` and whether the clamp fired.
fn exponent(pot: &DualPotentials, phi_x: &[f64], phi_y: &[f64], c: f64, p: &OtParams) -> (f64, bool) {
    let raw = (pot.mu(phi_x) - pot.nu(phi_y) - c) / p.smoothing;
    if raw > p.max_exponent {
        (p.max_exponent, true)
    } else if raw < -p.max_exponent {
        (-p.max_exponent, true)
    } else {
        (raw, false)
    }
}

fn integrand(gap: f64, f: f64, p: &OtParams) -> f64 {
    match p.form {
        DualForm::Smoothed => gap - p.smoothing * f,
        DualForm::ExpOverSmoothing => gap - f / p.smoothing,
    }
}

fn check_pair(pot: &DualPotentials, phi_x: &[f64], phi_y: &[f64]) -> Result<()> {
    check_dim(pot.p_mu.len(), phi_x.len())?;
    check_dim(pot.p_nu.len(), phi_y.len())
}

/// One stochastic ascent step on a single embedded pair with ground cost `c`:
/// `F = exp((p_mu.phi_x - p_nu.phi_y - c) / s)`, then
/// `(p_mu, p_nu) += (1 - F) * step * (phi_x, -phi_y)`.
pub fn dual_sgd_step(
    pot: &DualPotentials,
    phi_x: &[f64],
    phi_y: &[f64],
    c: f64,
    params: &OtParams,
) -> Result<DualPotentials> {
    let mut next = pot.clone();
    let batch = [(phi_x, phi_y, c)];
    apply_batch_step(&mut next, &batch, params)?;
    Ok(next)
}

/// Averaged step over a minibatch; returns the minibatch objective before the update.
fn apply_batch_step(
    pot: &mut DualPotentials,
    batch: &[(&[f64], &[f64], f64)],
    params: &OtParams,
) -> Result<f64> {
    let n = batch.len() as f64;
    let mut d_mu = vec![0.0; pot.p_mu.len()];
    let mut d_nu = vec![0.0; pot.p_nu.len()];
    let mut objective = 0.0;
    for &(phi_x, phi_y, c) in batch {
        check_pair(pot, phi_x, phi_y)?;
        let (arg, clamped) = exponent(pot, phi_x, phi_y, c, params);
        if clamped {
            pot.clamp_events += 1;
        }
        let f = arg.exp();
        objective += integrand(pot.mu(phi_x) - pot.nu(phi_y), f, params) / n;
        let w = (1.0 - f) * params.step_size / n;
        d_mu.iter_mut().zip(phi_x).for_each(|(d, v)| *d += w * v);
        d_nu.iter_mut().zip(phi_y).for_each(|(d, v)| *d -= w * v);
    }
    pot.p_mu.iter_mut().zip(&d_mu).for_each(|(p, d)| *p += d);
    pot.p_nu.iter_mut().zip(&d_nu).for_each(|(p, d)| *p += d);
    Ok(objective)
}

/// Source of `(x, y)` pairs drawn from the product of two distributions.
pub trait PairSampler {
    /// Next pair, or `None` once the source is exhausted.
    fn sample_pair(&mut self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, Vec<f64>)>;
}

/// Independent uniform draws from two finite sample sets, i.e. the product
/// of their empirical measures. Never exhausts.
pub struct ProductSampler<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [Vec<f64>],
}

impl<'a> ProductSampler<'a> {
    pub fn new(xs: &'a [Vec<f64>], ys: &'a [Vec<f64>]) -> Result<Self> {
        if xs.is_empty() || ys.is_empty() {
            return Err(Error::Config("product sampler needs nonempty sample sets".into()));
        }
        Ok(Self { xs, ys })
    }
}

impl PairSampler for ProductSampler<'_> {
    fn sample_pair(&mut self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, Vec<f64>)> {
        let i = rng.random_range(0..self.xs.len());
        let j = rng.random_range(0..self.ys.len());
        Some((self.xs[i].clone(), self.ys[j].clone()))
    }
}

/// Replays a fixed sequence of pairs, then exhausts.
pub struct ScriptedSampler<I> {
    pairs: I,
}

impl<I> ScriptedSampler<I>
where
    I: Iterator<Item = (Vec<f64>, Vec<f64>)>,
{
    pub fn new(pairs: impl IntoIterator<IntoIter = I>) -> Self {
        Self { pairs: pairs.into_iter() }
    }
}

impl<I> PairSampler for ScriptedSampler<I>
where
    I: Iterator<Item = (Vec<f64>, Vec<f64>)>,
{
    fn sample_pair(&mut self, _rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, Vec<f64>)> {
        self.pairs.next()
    }
}

/// Runs `params.rounds` ascent rounds from zero potentials. Each round draws
/// `params.minibatch` pairs, embeds `x` with `map_x` and `y` with `map_y`,
/// and applies the averaged update.
pub fn fit_potentials(
    sampler: &mut dyn PairSampler,
    map_x: &RandomFeatureMap,
    map_y: &RandomFeatureMap,
    params: &OtParams,
    seed: u64,
) -> Result<DualPotentials> {
    params.validate()?;
    check_dim(map_x.features(), map_y.features())?;
    let mut embedded = |rng: &mut ChaCha8Rng| -> Option<Result<(Vec<f64>, Vec<f64>)>> {
        let (x, y) = sampler.sample_pair(rng)?;
        Some(map_x.embed_one(&x).and_then(|px| Ok((px, map_y.embed_one(&y)?))))
    };
    fit_with(&mut embedded, map_x.features(), params, seed)
}

/// Same as [`fit_potentials`] for pairs that are already embedded.
pub fn fit_potentials_embedded(
    sampler: &mut dyn PairSampler,
    features: usize,
    params: &OtParams,
    seed: u64,
) -> Result<DualPotentials> {
    params.validate()?;
    let mut next = |rng: &mut ChaCha8Rng| sampler.sample_pair(rng).map(Ok);
    fit_with(&mut next, features, params, seed)
}

fn fit_with(
    next: &mut dyn FnMut(&mut ChaCha8Rng) -> Option<Result<(Vec<f64>, Vec<f64>)>>,
    features: usize,
    params: &OtParams,
    seed: u64,
) -> Result<DualPotentials> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pot = DualPotentials::zeros(features);
    pot.objective_trace.reserve(params.rounds);
    let mut pairs = Vec::with_capacity(params.minibatch);
    for round in 0..params.rounds {
        pairs.clear();
        for _ in 0..params.minibatch {
            match next(&mut rng) {
                Some(pair) => pairs.push(pair?),
                None => {
                    return Err(Error::Fitting { completed: round, requested: params.rounds });
                }
            }
        }
        let batch: Vec<(&[f64], &[f64], f64)> = pairs
            .iter()
            .map(|(x, y)| (x.as_slice(), y.as_slice(), sq_dist(x, y)))
            .collect();
        let obj = apply_batch_step(&mut pot, &batch, params)?;
        pot.objective_trace.push(obj);
        pot.rounds_run += 1;
    }
    Ok(pot)
}

/// Empirical mean of the dual integrand over embedded evaluation pairs.
/// Negative values are returned as-is.
pub fn estimate_wd(
    pot: &DualPotentials,
    eval_pairs: &[(Vec<f64>, Vec<f64>)],
    params: &OtParams,
) -> Result<f64> {
    if eval_pairs.is_empty() {
        return Err(Error::Estimation("no evaluation pairs".into()));
    }
    let mut total = 0.0;
    for (phi_x, phi_y) in eval_pairs {
        check_pair(pot, phi_x, phi_y)?;
        let c = sq_dist(phi_x, phi_y);
        let (arg, _) = exponent(pot, phi_x, phi_y, c, params);
        total += integrand(pot.mu(phi_x) - pot.nu(phi_y), arg.exp(), params);
    }
    Ok(total / eval_pairs.len() as f64)
}

/// Gradient of the estimator integrand for one pair with respect to `phi_x`,
/// potentials held fixed. Clamped exponents contribute no gradient through `F`.
pub fn integrand_grad_x(
    pot: &DualPotentials,
    phi_x: &[f64],
    phi_y: &[f64],
    params: &OtParams,
) -> Result<Vec<f64>> {
    check_pair(pot, phi_x, phi_y)?;
    let c = sq_dist(phi_x, phi_y);
    let (arg, clamped) = exponent(pot, phi_x, phi_y, c, params);
    // d(arg)/d(phi_x) = (p_mu - 2 (phi_x - phi_y)) / s
    let coeff = if clamped {
        0.0
    } else {
        let f = arg.exp();
        match params.form {
            DualForm::Smoothed => f,
            DualForm::ExpOverSmoothing => f / (params.smoothing * params.smoothing),
        }
    };
    Ok(pot
        .p_mu
        .iter()
        .zip(phi_x.iter().zip(phi_y))
        .map(|(pm, (x, y))| pm - coeff * (pm - 2.0 * (x - y)))
        .collect())
}

/// Draws `count` pairs from the product of two embedded sample sets.
pub fn sample_product_pairs(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut sampler = ProductSampler::new(xs, ys)?;
    Ok((0..count).filter_map(|_| sampler.sample_pair(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(smoothing: f64, step: f64) -> OtParams {
        OtParams { smoothing, step_size: step, ..OtParams::default() }
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(cost(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(matches!(cost(&[1.0], &[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(OtParams { rounds: 0, ..OtParams::default() }.validate().is_err());
        assert!(OtParams { smoothing: 0.0, ..OtParams::default() }.validate().is_err());
        assert!(OtParams { step_size: -1.0, ..OtParams::default() }.validate().is_err());
        assert!(OtParams { eval_samples: 0, ..OtParams::default() }.validate().is_err());
        assert!(OtParams::default().validate().is_ok());
    }

    #[test]
    fn fixed_point_when_gap_equals_cost() {
        let pot = DualPotentials { p_mu: vec![1.0, 0.0], p_nu: vec![0.0, 0.5], ..DualPotentials::zeros(2) };
        let phi_x = [0.4, 0.1];
        let phi_y = [0.2, 0.2];
        let c = pot.mu(&phi_x) - pot.nu(&phi_y);
        let next = dual_sgd_step(&pot, &phi_x, &phi_y, c, &params(0.1, 0.5)).unwrap();
        assert_eq!(next.p_mu, pot.p_mu);
        assert_eq!(next.p_nu, pot.p_nu);
    }

    #[test]
    fn large_cost_gives_plain_step() {
        let pot = DualPotentials::zeros(2);
        let phi_x = [0.3, -0.2];
        let phi_y = [0.1, 0.4];
        let next = dual_sgd_step(&pot, &phi_x, &phi_y, 50.0, &params(0.1, 0.01)).unwrap();
        for j in 0..2 {
            assert!((next.p_mu[j] - 0.01 * phi_x[j]).abs() < 1e-15);
            assert!((next.p_nu[j] + 0.01 * phi_y[j]).abs() < 1e-15);
        }
        // exponent -500 clamps to -30
        assert_eq!(next.clamp_events, 1);
    }

    #[test]
    fn scripted_three_step_trace() {
        // Hand computation with smoothing 0.5, step 0.1, one feature, phi_x = 1,
        // phi_y = 0.5, c = 0.1:
        //   step 1: gap 0 -> F = exp(-0.2), p_mu = 0.1 (1 - F), p_nu = -0.05 (1 - F)
        //   and so on, each step using the previous potentials.
        let p = params(0.5, 0.1);
        let mut mu = 0.0f64;
        let mut nu = 0.0f64;
        let mut pot = DualPotentials::zeros(1);
        let expected = [
            (0.018_126_924_692_201_8, -0.009_063_462_346_100_9),
            (0.032_458_227_573_702_3, -0.016_229_113_786_851_1),
            (0.043_664_522_833_277_2, -0.021_832_261_416_638_6),
        ];
        for (want_mu, want_nu) in expected {
            let f = ((mu * 1.0 - nu * 0.5 - 0.1) / 0.5).exp();
            mu += (1.0 - f) * 0.1 * 1.0;
            nu -= (1.0 - f) * 0.1 * 0.5;
            pot = dual_sgd_step(&pot, &[1.0], &[0.5], 0.1, &p).unwrap();
            assert!((pot.p_mu[0] - mu).abs() < 1e-15);
            assert!((pot.p_nu[0] - nu).abs() < 1e-15);
            assert!((mu - want_mu).abs() < 1e-12, "{mu}");
            assert!((nu - want_nu).abs() < 1e-12, "{nu}");
        }
    }

    #[test]
    fn zero_potentials_estimate_is_negative_plug_in() {
        let pot = DualPotentials::zeros(2);
        let pairs = vec![(vec![0.0, 0.0], vec![0.3, 0.4]), (vec![0.1, 0.0], vec![0.1, 0.0])];
        let p = params(0.2, 0.01);
        let expected = 0.5 * (-0.2 * (-0.25f64 / 0.2).exp() - 0.2);
        let got = estimate_wd(&pot, &pairs, &p).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!(got < 0.0);
    }

    #[test]
    fn empty_eval_set_is_error() {
        let pot = DualPotentials::zeros(2);
        assert!(matches!(estimate_wd(&pot, &[], &OtParams::default()), Err(Error::Estimation(_))));
    }

    #[test]
    fn one_round_is_one_step() {
        let map = RandomFeatureMap::new(2, 8, 1.0, 3).unwrap();
        let x = vec![0.5, 0.1];
        let y = vec![-0.2, 0.7];
        let p = OtParams { rounds: 1, ..params(0.1, 0.05) };
        let mut sampler = ScriptedSampler::new(vec![(x.clone(), y.clone())]);
        let fitted = fit_potentials(&mut sampler, &map, &map, &p, 0).unwrap();
        let px = map.embed_one(&x).unwrap();
        let py = map.embed_one(&y).unwrap();
        let c = cost(&px, &py).unwrap();
        let step = dual_sgd_step(&DualPotentials::zeros(8), &px, &py, c, &p).unwrap();
        assert_eq!(fitted.p_mu, step.p_mu);
        assert_eq!(fitted.p_nu, step.p_nu);
        assert_eq!(fitted.rounds_run, 1);
        assert_eq!(fitted.objective_trace.len(), 1);
    }

    #[test]
    fn exhausted_sampler_reports_progress() {
        let map = RandomFeatureMap::new(1, 4, 1.0, 3).unwrap();
        let p = OtParams { rounds: 5, ..OtParams::default() };
        let mut sampler = ScriptedSampler::new(vec![(vec![0.0], vec![1.0]); 3]);
        match fit_potentials(&mut sampler, &map, &map, &p, 0) {
            Err(Error::Fitting { completed, requested }) => {
                assert_eq!((completed, requested), (3, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let map = RandomFeatureMap::new(2, 16, 1.0, 9).unwrap();
        let xs = vec![vec![0.0, 0.0], vec![1.0, 0.5]];
        let ys = vec![vec![2.0, 1.0], vec![0.5, 2.0]];
        let p = OtParams { rounds: 200, minibatch: 4, ..OtParams::default() };
        let a = fit_potentials(&mut ProductSampler::new(&xs, &ys).unwrap(), &map, &map, &p, 11).unwrap();
        let b = fit_potentials(&mut ProductSampler::new(&xs, &ys).unwrap(), &map, &map, &p, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rounds_run, 200);
    }

    #[test]
    fn integrand_gradient_matches_finite_differences() {
        for form in [DualForm::Smoothed, DualForm::ExpOverSmoothing] {
            let p = OtParams { smoothing: 0.3, form, ..OtParams::default() };
            let pot = DualPotentials {
                p_mu: vec![0.4, -0.3, 0.8],
                p_nu: vec![-0.1, 0.2, 0.5],
                ..DualPotentials::zeros(3)
            };
            let x = vec![0.2, 0.1, -0.3];
            let y = vec![-0.1, 0.3, 0.2];
            let g = integrand_grad_x(&pot, &x, &y, &p).unwrap();
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += 1e-6;
                xm[j] -= 1e-6;
                let fp = estimate_wd(&pot, &[(xp, y.clone())], &p).unwrap();
                let fm = estimate_wd(&pot, &[(xm, y.clone())], &p).unwrap();
                let fd = (fp - fm) / 2e-6;
                assert!((fd - g[j]).abs() < 1e-7, "{form:?} {j}: {fd} vs {}", g[j]);
            }
        }
    }
}
