//! Small deterministic differentiable toolkit: dense layers, an LSTM cell,
//! losses, Adam and a finite-difference gradient checker.
//!
//! Every layer has an explicit backward pass. Forward passes never mutate the
//! layer; the values needed for backpropagation are returned in a cache.

mod adam;
mod dense;
mod gradcheck;
mod loss;
mod lstm;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, DenseCache, DenseGrads, DenseLayer};
pub use gradcheck::{gradient_check, GradCheckReport, FD_STEP};
pub use loss::{log_softmax, mse_loss, softmax, softmax_cross_entropy};
pub use lstm::{LstmCache, LstmCell, LstmGrads};
pub use tensor::{axpy, dot, norm, Tensor2};

use rand::{Rng as _, SeedableRng};

use crate::error::{ensure_len, Result};

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Uniform(−1/√fan_in, +1/√fan_in) matrix.
pub fn uniform_fan_in(rng: &mut Rng, rows: usize, cols: usize, fan_in: usize) -> Tensor2 {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("shape is consistent by construction")
}

/// A set of trainable parameter buffers in a fixed order.
///
/// Gradient containers implement the same trait with the same ordering as the
/// parameters they belong to, so the optimizer can zip them.
pub trait Parameterized {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.params().concat()
    }

    fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        ensure_len("flat parameter vector", self.param_count(), flat.len())?;
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn zero(&mut self) {
        for p in self.params_mut() {
            p.fill(0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for p in self.params_mut() {
            p.iter_mut().for_each(|v| *v *= factor);
        }
    }
}
