//! Feed-forward encoder from response vectors into the embedding space,
//! trained with mean squared error against target embeddings.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::nn::{
    mse_loss, seeded_rng, Activation, AdamConfig, AdamState, DenseCache, DenseGrads, DenseLayer,
    Parameterized, Rng,
};

/// Per-dimension standardization fitted on training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    /// Population statistics; constant dimensions get unit scale.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Empty("z-score statistics over zero rows".into()))?;
        let dim = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            ensure_len("z-score row", dim, r.as_ref().len())?;
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("z-score input", self.dim(), x.len())?;
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RseTrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub standardize: bool,
    /// Stop once the loss improved by less than `early_stop_delta` over this many epochs.
    pub early_stop_window: usize,
    pub early_stop_delta: f64,
}

impl Default for RseTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256],
            epochs: 500,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            standardize: true,
            early_stop_window: 20,
            early_stop_delta: 1e-9,
        }
    }
}

impl RseTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be ≥ 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid learning rate {}", self.lr)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer width must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Dense stack: relu hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct RseModel {
    pub layers: Vec<DenseLayer>,
    pub normalization: Option<ZScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RseGrads {
    pub layers: Vec<DenseGrads>,
}

impl RseModel {
    pub fn new(layers: Vec<DenseLayer>, normalization: Option<ZScore>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("encoder needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            ensure_len("encoder layer chain", pair[0].output_dim(), pair[1].input_dim())?;
        }
        if let Some(z) = &normalization {
            ensure_len("encoder normalization", layers[0].input_dim(), z.dim())?;
        }
        Ok(Self {
            layers,
            normalization,
        })
    }

    pub fn init(input_dim: usize, output_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::init(w[0], w[1], act, rng)
            })
            .collect();
        Self {
            layers,
            normalization: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn zero_grads(&self) -> RseGrads {
        RseGrads {
            layers: self.layers.iter().map(DenseLayer::zero_grads).collect(),
        }
    }

    /// Applies the stored normalization, if any.
    pub fn preprocess(&self, response: &[f64]) -> Result<Vec<f64>> {
        ensure_len("encoder input", self.input_dim(), response.len())?;
        match &self.normalization {
            Some(z) => z.apply(response),
            None => Ok(response.to_vec()),
        }
    }

    /// Forward pass on an already preprocessed input.
    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<DenseCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let cache = layer.forward_cached(&h)?;
            h = cache.output.clone();
            caches.push(cache);
        }
        Ok((h, caches))
    }

    pub fn backward(&self, caches: &[DenseCache], d_out: &[f64], grads: &mut RseGrads) -> Vec<f64> {
        let mut d = d_out.to_vec();
        for ((layer, cache), g) in self
            .layers
            .iter()
            .zip(caches)
            .zip(&mut grads.layers)
            .rev()
        {
            d = layer.backward(cache, &d, g);
        }
        d
    }

    pub fn predict_embedding(&self, response: &[f64]) -> Result<EmbeddingVector> {
        let x = self.preprocess(response)?;
        let (out, _) = self.forward_cached(&x)?;
        EmbeddingVector::new(out)
    }

    pub fn predict_batch<R: AsRef<[f64]>>(&self, responses: &[R]) -> Result<Vec<EmbeddingVector>> {
        responses
            .iter()
            .map(|r| self.predict_embedding(r.as_ref()))
            .collect()
    }
}

impl Parameterized for RseModel {
    fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

impl Parameterized for RseGrads {
    fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

/// Mini-batch Adam on MSE. Returns the model and the per-epoch mean training loss.
pub fn train_rse<R: AsRef<[f64]>, T: AsRef<[f64]>>(
    inputs: &[R],
    targets: &[T],
    config: &RseTrainConfig,
) -> Result<(RseModel, Vec<f64>)> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("encoder training data".into()));
    }
    ensure_len("encoder targets", inputs.len(), targets.len())?;
    let input_dim = inputs[0].as_ref().len();
    let output_dim = targets[0].as_ref().len();
    for (x, y) in inputs.iter().zip(targets) {
        ensure_len("encoder training input", input_dim, x.as_ref().len())?;
        ensure_len("encoder training target", output_dim, y.as_ref().len())?;
        ensure_finite("encoder training input", x.as_ref())?;
        ensure_finite("encoder training target", y.as_ref())?;
    }

    let mut rng = seeded_rng(config.seed);
    let mut model = RseModel::init(input_dim, output_dim, &config.hidden, &mut rng);
    if config.standardize {
        model.normalization = Some(ZScore::fit(inputs)?);
    }
    let prepared: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| model.preprocess(x.as_ref()))
        .collect::<Result<_>>()?;

    let mut adam = AdamState::for_params(AdamConfig::with_lr(config.lr), &model.params());
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            for &i in batch {
                let (pred, caches) = model.forward_cached(&prepared[i])?;
                let (loss, d_out) = mse_loss(&pred, targets[i].as_ref())?;
                total += loss;
                model.backward(&caches, &d_out, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.update(model.params_mut(), grads.params())?;
        }
        let epoch_loss = total / inputs.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite(format!("encoder training loss at epoch {epoch}")));
        }
        curve.push(epoch_loss);
        let w = config.early_stop_window;
        if w > 0 && curve.len() > w {
            let before = curve[curve.len() - 1 - w];
            if before - epoch_loss < config.early_stop_delta {
                break;
            }
        }
    }
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine_similarity;
    use crate::nn::Tensor2;
    use rand::Rng as _;

    fn random_rows(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_model_predicts_zero() {
        let model = RseModel::new(
            vec![
                DenseLayer::zeros(4, 3, Activation::Relu),
                DenseLayer::zeros(3, 2, Activation::Identity),
            ],
            None,
        )
        .unwrap();
        assert_eq!(model.predict_embedding(&[1.0, 2.0, 3.0, 4.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(model.predict_embedding(&[1.0]).is_err());
    }

    #[test]
    fn rejects_broken_chain() {
        let err = RseModel::new(
            vec![
                DenseLayer::zeros(4, 3, Activation::Relu),
                DenseLayer::zeros(5, 2, Activation::Identity),
            ],
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn zscore_uses_given_rows_only() {
        let z = ZScore::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(z.mean, vec![2.0, 5.0]);
        assert_eq!(z.std, vec![1.0, 1.0]);
        assert_eq!(z.apply(&[4.0, 6.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn identity_task_converges() {
        let mut rng = seeded_rng(11);
        let xs = random_rows(&mut rng, 128, 8);
        let config = RseTrainConfig {
            hidden: vec![],
            epochs: 200,
            lr: 1e-2,
            seed: 3,
            ..Default::default()
        };
        let (model, curve) = train_rse(&xs, &xs, &config).unwrap();
        assert!(*curve.last().unwrap() < 1e-6, "final loss {}", curve.last().unwrap());
        let pred = model.predict_embedding(&xs[0]).unwrap();
        for (p, x) in pred.as_slice().iter().zip(&xs[0]) {
            assert!((p - x).abs() < 1e-3);
        }
    }

    #[test]
    fn linear_recovery_and_determinism() {
        let mut rng = seeded_rng(5);
        let mixing = Tensor2::from_rows(&random_rows(&mut rng, 6, 10)).unwrap();
        let xs = random_rows(&mut rng, 240, 10);
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| mixing.matvec(x).unwrap()).collect();
        let config = RseTrainConfig {
            hidden: vec![],
            epochs: 300,
            lr: 1e-2,
            seed: 9,
            ..Default::default()
        };
        let (model, curve) = train_rse(&xs[..200], &ys[..200], &config).unwrap();
        let mean_cos: f64 = xs[200..]
            .iter()
            .zip(&ys[200..])
            .map(|(x, y)| cosine_similarity(model.predict_embedding(x).unwrap().as_slice(), y).unwrap())
            .sum::<f64>()
            / 40.0;
        assert!(mean_cos >= 0.99, "holdout cosine {mean_cos}");
        for w in curve[5..].windows(2) {
            assert!(w[1] <= w[0], "loss rose after epoch 5: {} -> {}", w[0], w[1]);
        }

        let (_, again) = train_rse(&xs[..200], &ys[..200], &config).unwrap();
        assert_eq!(curve, again);
    }

    #[test]
    fn batch_matches_single_calls() {
        let mut rng = seeded_rng(2);
        let model = RseModel::init(5, 3, &[7], &mut rng);
        let xs = random_rows(&mut rng, 6, 5);
        let batch = model.predict_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            assert_eq!(&model.predict_embedding(x).unwrap(), b);
        }
    }

    #[test]
    fn training_errors() {
        let cfg = RseTrainConfig::default();
        assert!(train_rse::<Vec<f64>, Vec<f64>>(&[], &[], &cfg).is_err());
        assert!(train_rse(&[vec![1.0, 2.0], vec![1.0]], &[vec![0.0], vec![0.0]], &cfg).is_err());
        assert!(matches!(
            train_rse(&[vec![f64::NAN]], &[vec![0.0]], &cfg),
            Err(Error::NonFinite(_))
        ));
    }
}
