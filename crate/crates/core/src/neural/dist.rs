//! Action distributions produced by policy heads.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Action taken in an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// Vector form used for embedding: one-hot for discrete actions.
    pub fn to_vector(&self, num_actions: usize) -> Vec<f64> {
        match self {
            Action::Discrete(a) => one_hot(*a, num_actions),
            Action::Continuous(v) => v.clone(),
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }
}

pub fn one_hot(index: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[index] = 1.0;
    v
}

/// Head output: parameters of the action distribution at one state.
#[derive(Debug, Clone, PartialEq)]
pub enum DistParams {
    Categorical { logits: Vec<f64> },
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

/// Gradient of a scalar with respect to the head output.
#[derive(Debug, Clone, PartialEq)]
pub enum DistGrad {
    Categorical { d_logits: Vec<f64> },
    Gaussian { d_mean: Vec<f64>, d_log_std: Vec<f64> },
}

impl DistGrad {
    pub fn zeros_like(d: &DistParams) -> Self {
        match d {
            DistParams::Categorical { logits } => DistGrad::Categorical { d_logits: vec![0.0; logits.len()] },
            DistParams::Gaussian { mean, .. } => {
                DistGrad::Gaussian { d_mean: vec![0.0; mean.len()], d_log_std: vec![0.0; mean.len()] }
            }
        }
    }

    /// `self += scale * other`; both must be the same head kind.
    pub fn add_scaled(&mut self, other: &DistGrad, scale: f64) {
        match (self, other) {
            (DistGrad::Categorical { d_logits: a }, DistGrad::Categorical { d_logits: b }) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
            }
            (
                DistGrad::Gaussian { d_mean: am, d_log_std: al },
                DistGrad::Gaussian { d_mean: bm, d_log_std: bl },
            ) => {
                am.iter_mut().zip(bm).for_each(|(x, y)| *x += scale * y);
                al.iter_mut().zip(bl).for_each(|(x, y)| *x += scale * y);
            }
            _ => panic!("mismatched head kinds"),
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

impl DistParams {
    /// Action dimension (one-hot width for categorical heads).
    pub fn action_dim(&self) -> usize {
        match self {
            DistParams::Categorical { logits } => logits.len(),
            DistParams::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (DistParams::Categorical { logits }, Action::Discrete(a)) => {
                if *a >= logits.len() {
                    return Err(Error::Domain(format!("action {a} outside 0..{}", logits.len())));
                }
                Ok(log_softmax(logits)[*a])
            }
            (DistParams::Gaussian { mean, log_std }, Action::Continuous(x)) => {
                check_dim(mean.len(), x.len())?;
                Ok(mean
                    .iter()
                    .zip(log_std)
                    .zip(x)
                    .map(|((m, ls), a)| {
                        let z = (a - m) / ls.exp();
                        -0.5 * z * z - ls - HALF_LN_2PI
                    })
                    .sum())
            }
            _ => Err(Error::Domain("action kind does not match distribution".into())),
        }
    }

    /// Gradient of `log_prob(action)` with respect to the head output.
    pub fn log_prob_grad(&self, action: &Action) -> Result<DistGrad> {
        match (self, action) {
            (DistParams::Categorical { logits }, Action::Discrete(a)) => {
                if *a >= logits.len() {
                    return Err(Error::Domain(format!("action {a} outside 0..{}", logits.len())));
                }
                let mut d = softmax(logits);
                d.iter_mut().for_each(|p| *p = -*p);
                d[*a] += 1.0;
                Ok(DistGrad::Categorical { d_logits: d })
            }
            (DistParams::Gaussian { mean, log_std }, Action::Continuous(x)) => {
                check_dim(mean.len(), x.len())?;
                let mut d_mean = Vec::with_capacity(mean.len());
                let mut d_log_std = Vec::with_capacity(mean.len());
                for ((m, ls), a) in mean.iter().zip(log_std).zip(x) {
                    let s = ls.exp();
                    let z = (a - m) / s;
                    d_mean.push(z / s);
                    d_log_std.push(z * z - 1.0);
                }
                Ok(DistGrad::Gaussian { d_mean, d_log_std })
            }
            _ => Err(Error::Domain("action kind does not match distribution".into())),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            DistParams::Categorical { logits } => {
                let lp = log_softmax(logits);
                -lp.iter().map(|l| l.exp() * l).sum::<f64>()
            }
            DistParams::Gaussian { log_std, .. } => log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum(),
        }
    }

    pub fn entropy_grad(&self) -> DistGrad {
        match self {
            DistParams::Categorical { logits } => {
                let lp = log_softmax(logits);
                let h = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
                DistGrad::Categorical {
                    d_logits: lp.iter().map(|l| -l.exp() * (l + h)).collect(),
                }
            }
            DistParams::Gaussian { mean, .. } => DistGrad::Gaussian {
                d_mean: vec![0.0; mean.len()],
                d_log_std: vec![1.0; mean.len()],
            },
        }
    }

    /// Reparameterized Gaussian sample `mean + exp(log_std) * eps`.
    pub fn sample_gaussian(&self, eps: &[f64]) -> Result<Vec<f64>> {
        match self {
            DistParams::Gaussian { mean, log_std } => {
                check_dim(mean.len(), eps.len())?;
                Ok(mean.iter().zip(log_std).zip(eps).map(|((m, ls), e)| m + ls.exp() * e).collect())
            }
            _ => Err(Error::Domain("gaussian sample from categorical head".into())),
        }
    }

    /// Inverse-CDF categorical sample from a uniform draw in `[0, 1)`.
    pub fn sample_categorical(&self, u: f64) -> Result<usize> {
        match self {
            DistParams::Categorical { logits } => {
                let probs = softmax(logits);
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(i);
                    }
                }
                Ok(probs.len() - 1)
            }
            _ => Err(Error::Domain("categorical sample from gaussian head".into())),
        }
    }

    /// Sample with externally supplied randomness: `normals` for Gaussian
    /// heads, `uniform` for categorical heads.
    pub fn sample(&self, uniform: f64, normals: &[f64]) -> Result<Action> {
        match self {
            DistParams::Categorical { .. } => self.sample_categorical(uniform).map(Action::Discrete),
            DistParams::Gaussian { .. } => self.sample_gaussian(normals).map(Action::Continuous),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn uniform_categorical() {
        let d = DistParams::Categorical { logits: vec![0.3; 5] };
        for a in 0..5 {
            assert!((d.log_prob(&Action::Discrete(a)).unwrap() + 5f64.ln()).abs() < 1e-14);
        }
        assert!((d.entropy() - 5f64.ln()).abs() < 1e-14);
        assert!(matches!(d.log_prob(&Action::Discrete(5)), Err(Error::Domain(_))));
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let d = DistParams::Gaussian { mean: vec![0.0], log_std: vec![0.0] };
        let lp = d.log_prob(&Action::Continuous(vec![0.0])).unwrap();
        assert!((lp + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_within_three_standard_errors() {
        let d = DistParams::Gaussian { mean: vec![1.5], log_std: vec![0.7f64.ln()] };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            total += d.sample_gaussian(&[e]).unwrap()[0];
        }
        let mean = total / n as f64;
        assert!((mean - 1.5).abs() < 3.0 * 0.7 / (n as f64).sqrt());

        let c = DistParams::Categorical { logits: vec![0.0, 1.0, -1.0] };
        let probs = softmax(&[0.0, 1.0, -1.0]);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[c.sample_categorical(rng.random::<f64>()).unwrap()] += 1;
        }
        for (k, p) in probs.iter().enumerate() {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[k] as f64 / n as f64 - p).abs() < 3.0 * se);
        }
    }

    #[test]
    fn negative_log_prob_averages_to_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let g = DistParams::Gaussian { mean: vec![0.2, -1.0], log_std: vec![-0.3, 0.4] };
        let c = DistParams::Categorical { logits: vec![0.5, -0.2, 1.1, 0.0] };
        let mut g_total = 0.0;
        let mut c_total = 0.0;
        for _ in 0..n {
            let eps: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            let a = g.sample(0.0, &eps).unwrap();
            g_total -= g.log_prob(&a).unwrap();
            let a = c.sample(rng.random::<f64>(), &[]).unwrap();
            c_total -= c.log_prob(&a).unwrap();
        }
        assert!((g_total / n as f64 - g.entropy()).abs() < 0.01 * g.entropy().abs());
        assert!((c_total / n as f64 - c.entropy()).abs() < 0.01 * c.entropy());
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let logits = vec![0.3, -0.8, 1.2];
        let a = Action::Discrete(1);
        let DistGrad::Categorical { d_logits } = DistParams::Categorical { logits: logits.clone() }.log_prob_grad(&a).unwrap()
        else {
            unreachable!()
        };
        let DistGrad::Categorical { d_logits: d_ent } = DistParams::Categorical { logits: logits.clone() }.entropy_grad()
        else {
            unreachable!()
        };
        for j in 0..3 {
            let mut lp = logits.clone();
            let mut lm = logits.clone();
            lp[j] += 1e-6;
            lm[j] -= 1e-6;
            let p = DistParams::Categorical { logits: lp };
            let m = DistParams::Categorical { logits: lm };
            let fd = (p.log_prob(&a).unwrap() - m.log_prob(&a).unwrap()) / 2e-6;
            assert!((fd - d_logits[j]).abs() < 1e-8);
            let fd = (p.entropy() - m.entropy()) / 2e-6;
            assert!((fd - d_ent[j]).abs() < 1e-8);
        }
        let g = DistParams::Gaussian { mean: vec![0.4], log_std: vec![-0.2] };
        let a = Action::Continuous(vec![1.1]);
        let DistGrad::Gaussian { d_mean, d_log_std } = g.log_prob_grad(&a).unwrap() else { unreachable!() };
        let f = |m: f64, s: f64| DistParams::Gaussian { mean: vec![m], log_std: vec![s] }.log_prob(&a).unwrap();
        assert!(((f(0.4 + 1e-6, -0.2) - f(0.4 - 1e-6, -0.2)) / 2e-6 - d_mean[0]).abs() < 1e-8);
        assert!(((f(0.4, -0.2 + 1e-6) - f(0.4, -0.2 - 1e-6)) / 2e-6 - d_log_std[0]).abs() < 1e-8);
    }
}
