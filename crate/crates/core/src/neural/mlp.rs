use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// Dense feedforward architecture with tanh hidden activations and a linear
/// output layer. Parameters live outside the struct in one flat slice laid
/// out layer by layer as row-major `W (out x in)` followed by `b (out)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
}

/// Layer inputs recorded by [`Mlp::forward`]; `inputs[l]` feeds layer `l`.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub(crate) inputs: Vec<Vec<f64>>,
    pub(crate) output: Vec<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes {sizes:?}");
        Self { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Scaled-normal initialization; the output layer is multiplied by `output_gain`.
    pub fn init_params(&self, rng: &mut impl Rng, output_gain: f64) -> Vec<f64> {
        let layers = self.sizes.len() - 1;
        let mut params = Vec::with_capacity(self.param_count());
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            let std = gain / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(rng);
                params.push(std * z);
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        params
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<MlpCache> {
        check_dim(self.param_count(), params.len())?;
        check_dim(self.input_dim(), x.len())?;
        let layers = self.sizes.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut h = x.to_vec();
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[offset..offset + n_in * n_out];
            let bias = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut out: Vec<f64> = bias.to_vec();
            for (o, row) in out.iter_mut().zip(weights.chunks_exact(n_in)) {
                *o += row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            inputs.push(std::mem::replace(&mut h, out));
        }
        Ok(MlpCache { inputs, output: h })
    }

    /// Accumulates `dL/dparams` into `grads` and returns `dL/dx`.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_out: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        check_dim(self.output_dim(), d_out.len())?;
        check_dim(self.param_count(), grads.len())?;
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.inputs[l];
            let weights = &params[off..off + n_in * n_out];
            {
                let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (o, d) in delta.iter().enumerate() {
                    gb[o] += d;
                    if *d != 0.0 {
                        for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                            *g += d * x;
                        }
                    }
                }
            }
            let mut d_in = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    for (di, w) in d_in.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *di += d * w;
                    }
                }
            }
            if l > 0 {
                // input to layer l is tanh of the previous pre-activation
                d_in.iter_mut().zip(input).for_each(|(d, a)| *d *= 1.0 - a * a);
            }
            delta = d_in;
        }
        Ok(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_linear_layer_gradient_is_outer_product() {
        let mlp = Mlp::new(vec![3, 2]);
        let params = vec![0.1, 0.2, 0.3, -0.4, 0.5, -0.6, 0.05, -0.05];
        let x = [1.0, -2.0, 0.5];
        let cache = mlp.forward(&params, &x).unwrap();
        let up = [0.7, -1.3];
        let mut grads = vec![0.0; mlp.param_count()];
        let dx = mlp.backward(&params, &cache, &up, &mut grads).unwrap();
        let expected_w: Vec<f64> = up.iter().flat_map(|u| x.iter().map(move |xi| u * xi)).collect();
        assert_eq!(&grads[..6], expected_w.as_slice());
        assert_eq!(&grads[6..], &up);
        // dL/dx = W^T up
        assert!((dx[0] - (0.1 * 0.7 + -0.4 * -1.3)).abs() < 1e-15);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mlp = Mlp::new(vec![4, 8, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = mlp.init_params(&mut rng, 1.0);
        let cache = mlp.forward(&params, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut grads = vec![0.0; mlp.param_count()];
        mlp.backward(&params, &cache, &[0.0; 3], &mut grads).unwrap();
        assert!(grads.iter().all(|g| *g == 0.0));
    }
}
