//! Random Fourier feature map for the Gaussian (RBF) kernel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `phi(x) = cos((x / bandwidth) G + b) / sqrt(m)` with `G` standard normal
/// (d x m, row-major) and `b` uniform on `[0, 2pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFeatureMap {
    g: Vec<f64>,
    b: Vec<f64>,
    input_dim: usize,
    features: usize,
    bandwidth: f64,
    seed: u64,
}

impl RandomFeatureMap {
    pub fn new(input_dim: usize, features: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("feature map input dimension must be >= 1".into()));
        }
        if features == 0 {
            return Err(Error::Config("feature count must be >= 1".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..input_dim * features)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let offset = Uniform::new_inclusive(0.0, 2.0 * std::f64::consts::PI)
            .expect("valid uniform range");
        let b: Vec<f64> = (0..features).map(|_| offset.sample(&mut rng)).collect();
        Ok(Self { g, b, input_dim, features, bandwidth, seed })
    }

    /// Same map with every offset set to zero. Used to check `phi(0) = 1/sqrt(m)`.
    pub fn with_zero_offset(mut self) -> Self {
        self.b.iter_mut().for_each(|v| *v = 0.0);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Projection matrix, row-major `input_dim x features`.
    pub fn projection(&self) -> &[f64] {
        &self.g
    }

    pub fn offset(&self) -> &[f64] {
        &self.b
    }

    fn phases(&self, x: &[f64]) -> Vec<f64> {
        let m = self.features;
        let mut z = self.b.clone();
        for (i, &xi) in x.iter().enumerate() {
            let s = xi / self.bandwidth;
            if s == 0.0 {
                continue;
            }
            let row = &self.g[i * m..(i + 1) * m];
            for (zj, gij) in z.iter_mut().zip(row) {
                *zj += s * gij;
            }
        }
        z
    }

    /// Embed a single vector.
    pub fn embed_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        let scale = 1.0 / (self.features as f64).sqrt();
        Ok(self.phases(x).into_iter().map(|z| scale * z.cos()).collect())
    }

    /// Embed a batch of vectors.
    pub fn embed(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.embed_one(x)).collect()
    }

    /// Vector-Jacobian product: given `upstream = dL/dphi(x)`, return `dL/dx`.
    pub fn pullback(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        check_dim(self.features, upstream.len())?;
        let m = self.features;
        let scale = 1.0 / (m as f64).sqrt();
        // d phi_j / d z_j = -sin(z_j) / sqrt(m)
        let dz: Vec<f64> = self
            .phases(x)
            .iter()
            .zip(upstream)
            .map(|(z, u)| -u * scale * z.sin())
            .collect();
        Ok((0..self.input_dim)
            .map(|i| {
                let row = &self.g[i * m..(i + 1) * m];
                row.iter().zip(&dz).map(|(g, d)| g * d).sum::<f64>() / self.bandwidth
            })
            .collect())
    }
}

/// Median pairwise Euclidean distance, a common bandwidth choice for RBF kernels.
/// Returns `None` when fewer than two points or every distance is zero.
pub fn median_heuristic(points: &[Vec<f64>]) -> Option<f64> {
    let mut dists = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            dists.push(d.sqrt());
        }
    }
    if dists.is_empty() {
        return None;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let med = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    (med > 0.0).then_some(med)
}
