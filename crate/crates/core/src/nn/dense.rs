use serde::{Deserialize, Serialize};

use super::{uniform_fan_in, Parameterized, Rng, Tensor2};
use crate::error::{ensure_finite, ensure_len, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    #[inline]
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

/// Fully connected layer `activation(W x + b)` with `W` shaped out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor2,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre_activation: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Tensor2,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Tensor2, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        ensure_len("dense bias", weight.rows(), bias.len())?;
        weight.check_finite("dense weight")?;
        ensure_finite("dense bias", &bias)?;
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Tensor2::zeros(output_dim, input_dim),
            bias: vec![0.0; output_dim],
            activation,
        }
    }

    /// Weights uniform in ±1/√input_dim, biases zero.
    pub fn init(input_dim: usize, output_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        Self {
            weight: uniform_fan_in(rng, output_dim, input_dim, input_dim),
            bias: vec![0.0; output_dim],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<DenseCache> {
        let mut pre = self.weight.matvec(x)?;
        for (p, b) in pre.iter_mut().zip(&self.bias) {
            *p += b;
        }
        let output = pre.iter().map(|&p| self.activation.apply(p)).collect();
        Ok(DenseCache {
            input: x.to_vec(),
            pre_activation: pre,
            output,
        })
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&self, cache: &DenseCache, d_out: &[f64], grads: &mut DenseGrads) -> Vec<f64> {
        let d_pre: Vec<f64> = d_out
            .iter()
            .zip(&cache.pre_activation)
            .zip(&cache.output)
            .map(|((&d, &p), &o)| d * self.activation.derivative(p, o))
            .collect();
        grads.weight.add_outer(&d_pre, &cache.input);
        for (gb, d) in grads.bias.iter_mut().zip(&d_pre) {
            *gb += d;
        }
        let mut d_in = vec![0.0; self.input_dim()];
        self.weight.matvec_t_acc(&d_pre, &mut d_in);
        d_in
    }

    pub fn zero_grads(&self) -> DenseGrads {
        DenseGrads {
            weight: Tensor2::zeros(self.output_dim(), self.input_dim()),
            bias: vec![0.0; self.output_dim()],
        }
    }
}

impl Parameterized for DenseLayer {
    fn params(&self) -> Vec<&[f64]> {
        vec![self.weight.data(), &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.data_mut(), &mut self.bias]
    }
}

impl Parameterized for DenseGrads {
    fn params(&self) -> Vec<&[f64]> {
        vec![self.weight.data(), &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.data_mut(), &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded_rng;

    #[test]
    fn zero_layer_gives_zero() {
        let layer = DenseLayer::zeros(3, 2, Activation::Identity);
        assert_eq!(layer.forward(&[1.0, -2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_weights_pass_through() {
        let layer = DenseLayer::new(Tensor2::identity(2), vec![0.0; 2], Activation::Identity).unwrap();
        assert_eq!(layer.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        // 1 - 3 + 0.5 = -1.5
        let w = Tensor2::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.5], Activation::Relu).unwrap();
        let cache = layer.forward_cached(&[1.0, -3.0]).unwrap();
        assert_eq!(cache.output, vec![0.0]);
        assert_eq!(cache.pre_activation, vec![-1.5]);
    }

    #[test]
    fn dimension_mismatch() {
        let layer = DenseLayer::zeros(3, 2, Activation::Tanh);
        assert!(layer.forward(&[1.0]).is_err());
        assert!(DenseLayer::new(Tensor2::zeros(2, 2), vec![0.0], Activation::Relu).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = seeded_rng(3);
        let layer = DenseLayer::init(5, 4, Activation::Tanh, &mut rng);
        let x = [0.1, -0.2, 0.3, 0.4, -0.5];
        let a = layer.forward(&x).unwrap();
        let b = layer.forward(&x).unwrap();
        assert_eq!(a, b);
    }
}
