//! One-to-many LSTM decoder from a single embedding to a caption.
//!
//! The conditioning vector enters only through the initial hidden state
//! `h₀ = tanh(W e + b)` with `c₀ = 0`. Training uses teacher forcing and
//! cross-entropy averaged over non-pad target tokens; generation is greedy.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::encoder::ZScore;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::nn::{
    log_softmax, seeded_rng, softmax_cross_entropy, uniform_fan_in, Activation, AdamConfig,
    AdamState, DenseCache, DenseGrads, DenseLayer, LstmCache, LstmCell, LstmGrads, Parameterized,
    Rng, Tensor2,
};
use crate::vocab::{validate_sequence, CaptionRecord, Vocabulary, END, PAD, START};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub max_len: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Z-score the conditioning vectors with training statistics.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            hidden: 128,
            max_len: 30,
            epochs: 100,
            batch_size: 32,
            lr: 5e-3,
            seed: 0,
            standardize: true,
        }
    }
}

impl DecoderConfig {
    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument("decoder widths must be ≥ 1".into()));
        }
        if self.max_len < 2 {
            return Err(Error::InvalidArgument("max_len must be ≥ 2".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be ≥ 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid learning rate {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    /// conditioning → h₀, tanh
    pub init: DenseLayer,
    /// V×E token embedding table
    pub token_embedding: Tensor2,
    pub lstm: LstmCell,
    /// H → V logits
    pub output: DenseLayer,
    pub vocab: Vocabulary,
    pub max_len: usize,
    /// Standardization applied to the conditioning vector before `init`.
    pub normalization: Option<ZScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrads {
    pub init: DenseGrads,
    pub token_embedding: Tensor2,
    pub lstm: LstmGrads,
    pub output: DenseGrads,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCaption {
    pub text: String,
    /// Emitted indices, excluding `<start>` and `<end>`.
    pub tokens: Vec<usize>,
    /// True when `max_len` was reached without `<end>`.
    pub truncated: bool,
}

/// Teacher-forced loss of one sequence.
#[derive(Debug, Clone)]
pub struct SequenceLoss {
    /// Summed cross-entropy over counted positions.
    pub total: f64,
    /// Number of non-pad target tokens.
    pub count: usize,
    /// Gradient of `total` w.r.t. the conditioning vector.
    pub d_condition: Vec<f64>,
}

struct StepCache {
    lstm: LstmCache,
    output: Option<(DenseCache, Vec<f64>)>,
}

impl DecoderModel {
    pub fn init(condition_dim: usize, vocab: Vocabulary, config: &DecoderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let v = vocab.len();
        let init = DenseLayer::init(condition_dim, config.hidden, Activation::Tanh, rng);
        let token_embedding = uniform_fan_in(rng, v, config.embed_dim, config.embed_dim);
        let lstm = LstmCell::init(config.embed_dim, config.hidden, rng);
        let output = DenseLayer::init(config.hidden, v, Activation::Identity, rng);
        Self::new(init, token_embedding, lstm, output, vocab, config.max_len)
    }

    pub fn new(
        init: DenseLayer,
        token_embedding: Tensor2,
        lstm: LstmCell,
        output: DenseLayer,
        vocab: Vocabulary,
        max_len: usize,
    ) -> Result<Self> {
        ensure_len("decoder init projection", lstm.hidden_dim, init.output_dim())?;
        ensure_len("decoder token table rows", vocab.len(), token_embedding.rows())?;
        ensure_len("decoder token table width", lstm.input_dim, token_embedding.cols())?;
        ensure_len("decoder output input", lstm.hidden_dim, output.input_dim())?;
        ensure_len("decoder output width", vocab.len(), output.output_dim())?;
        if max_len < 2 {
            return Err(Error::InvalidArgument("max_len must be ≥ 2".into()));
        }
        Ok(Self {
            init,
            token_embedding,
            lstm,
            output,
            vocab,
            max_len,
            normalization: None,
        })
    }

    pub fn with_normalization(mut self, normalization: Option<ZScore>) -> Result<Self> {
        if let Some(z) = &normalization {
            ensure_len("decoder normalization", self.condition_dim(), z.dim())?;
        }
        self.normalization = normalization;
        Ok(self)
    }

    pub fn condition_dim(&self) -> usize {
        self.init.input_dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn zero_grads(&self) -> DecoderGrads {
        DecoderGrads {
            init: self.init.zero_grads(),
            token_embedding: Tensor2::zeros(self.token_embedding.rows(), self.token_embedding.cols()),
            lstm: self.lstm.zero_grads(),
            output: self.output.zero_grads(),
        }
    }

    fn initial_state(&self, condition: &[f64]) -> Result<(DenseCache, Vec<f64>)> {
        ensure_len("decoder conditioning", self.condition_dim(), condition.len())?;
        ensure_finite("decoder conditioning", condition)?;
        let cache = match &self.normalization {
            Some(z) => self.init.forward_cached(&z.apply(condition)?)?,
            None => self.init.forward_cached(condition)?,
        };
        let h0 = cache.output.clone();
        Ok((cache, h0))
    }

    /// Teacher-forced cross-entropy of `tokens` given `condition`. When
    /// `grads` is given, parameter gradients of the summed loss are
    /// accumulated into it.
    pub fn sequence_loss(
        &self,
        condition: &[f64],
        tokens: &[usize],
        grads: Option<&mut DecoderGrads>,
    ) -> Result<SequenceLoss> {
        if tokens.len() < 2 {
            return Err(Error::InvalidArgument("sequence needs at least two tokens".into()));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab_size()) {
            return Err(Error::InvalidArgument(format!(
                "token index {bad} out of range for vocabulary of {}",
                self.vocab_size()
            )));
        }
        let (init_cache, mut h) = self.initial_state(condition)?;
        let mut c = vec![0.0; self.lstm.hidden_dim];
        let mut steps = Vec::with_capacity(tokens.len() - 1);
        let mut total = 0.0;
        let mut count = 0;
        for t in 0..tokens.len() - 1 {
            let x = self.token_embedding.row(tokens[t]);
            let (h_next, c_next, lstm_cache) = self.lstm.step_cached(x, &h, &c)?;
            h = h_next;
            c = c_next;
            let target = tokens[t + 1];
            let output = if target == PAD {
                None
            } else {
                let out_cache = self.output.forward_cached(&h)?;
                let (loss, d_logits) = softmax_cross_entropy(&out_cache.output, target)?;
                total += loss;
                count += 1;
                Some((out_cache, d_logits))
            };
            steps.push(StepCache {
                lstm: lstm_cache,
                output,
            });
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("decoder sequence loss".into()));
        }

        let Some(grads) = grads else {
            return Ok(SequenceLoss {
                total,
                count,
                d_condition: Vec::new(),
            });
        };
        let hidden = self.lstm.hidden_dim;
        let mut d_h_next = vec![0.0; hidden];
        let mut d_c_next = vec![0.0; hidden];
        for (t, step) in steps.iter().enumerate().rev() {
            let mut d_h = d_h_next;
            if let Some((out_cache, d_logits)) = &step.output {
                let d_from_out = self.output.backward(out_cache, d_logits, &mut grads.output);
                for (a, b) in d_h.iter_mut().zip(&d_from_out) {
                    *a += b;
                }
            }
            let (d_x, d_h_prev, d_c_prev) = self.lstm.backward(&step.lstm, &d_h, &d_c_next, &mut grads.lstm);
            for (g, d) in grads.token_embedding.row_mut(tokens[t]).iter_mut().zip(&d_x) {
                *g += d;
            }
            d_h_next = d_h_prev;
            d_c_next = d_c_prev;
        }
        let mut d_condition = self.init.backward(&init_cache, &d_h_next, &mut grads.init);
        if let Some(z) = &self.normalization {
            d_condition.iter_mut().zip(&z.std).for_each(|(d, s)| *d /= s);
        }
        Ok(SequenceLoss {
            total,
            count,
            d_condition,
        })
    }

    fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.output.forward(h)
    }

    /// Greedy decoding from `<start>` until `<end>` or `max_len − 1` content tokens.
    pub fn generate_caption(&self, embedding: &[f64]) -> Result<GeneratedCaption> {
        let (_, mut h) = self.initial_state(embedding)?;
        let mut c = vec![0.0; self.lstm.hidden_dim];
        let mut token = START;
        let mut emitted = Vec::new();
        for _ in 0..self.max_len - 1 {
            let (h_next, c_next) = self.lstm.step(self.token_embedding.row(token), &h, &c)?;
            h = h_next;
            c = c_next;
            let next = argmax(&self.logits(&h)?);
            if next == END {
                return Ok(GeneratedCaption {
                    text: self.vocab.decode(&emitted)?,
                    tokens: emitted,
                    truncated: false,
                });
            }
            emitted.push(next);
            token = next;
        }
        Ok(GeneratedCaption {
            text: self.vocab.decode(&emitted)?,
            tokens: emitted,
            truncated: true,
        })
    }

    /// `log p(tokenₜ | e, prefix)` for every position after `<start>`,
    /// skipping `<pad>` targets.
    pub fn token_log_likelihoods(&self, embedding: &[f64], target: &[usize]) -> Result<Vec<f64>> {
        validate_sequence(target, self.vocab_size())?;
        let (_, mut h) = self.initial_state(embedding)?;
        let mut c = vec![0.0; self.lstm.hidden_dim];
        let mut out = Vec::with_capacity(target.len() - 1);
        for t in 0..target.len() - 1 {
            let (h_next, c_next) = self.lstm.step(self.token_embedding.row(target[t]), &h, &c)?;
            h = h_next;
            c = c_next;
            if target[t + 1] != PAD {
                out.push(log_softmax(&self.logits(&h)?)[target[t + 1]]);
            }
        }
        Ok(out)
    }
}

/// First index of the maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl Parameterized for DecoderModel {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.init.params();
        p.push(self.token_embedding.data());
        p.extend(self.lstm.params());
        p.extend(self.output.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.init.params_mut();
        p.push(self.token_embedding.data_mut());
        p.extend(self.lstm.params_mut());
        p.extend(self.output.params_mut());
        p
    }
}

impl Parameterized for DecoderGrads {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.init.params();
        p.push(self.token_embedding.data());
        p.extend(self.lstm.params());
        p.extend(self.output.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.init.params_mut();
        p.push(self.token_embedding.data_mut());
        p.extend(self.lstm.params_mut());
        p.extend(self.output.params_mut());
        p
    }
}

/// Trains the decoder on raw `(conditioning, token sequence)` pairs.
///
/// With `freeze_init` the initial-state projection keeps its random
/// initialization. Returns the per-epoch mean loss per counted token.
pub fn fit_sequences<C: AsRef<[f64]>, S: AsRef<[usize]>>(
    model: &mut DecoderModel,
    conditions: &[C],
    sequences: &[S],
    config: &DecoderConfig,
    rng: &mut Rng,
    freeze_init: bool,
) -> Result<Vec<f64>> {
    config.validate()?;
    if conditions.is_empty() {
        return Err(Error::Empty("decoder training data".into()));
    }
    ensure_len("decoder training sequences", conditions.len(), sequences.len())?;
    for s in sequences {
        validate_sequence(s.as_ref(), model.vocab_size())?;
    }

    let mut adam = AdamState::for_params(AdamConfig::with_lr(config.lr), &model.params());
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..conditions.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut epoch_total = 0.0;
        let mut epoch_count = 0;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            let mut batch_count = 0;
            for &i in batch {
                let loss = model.sequence_loss(conditions[i].as_ref(), sequences[i].as_ref(), Some(&mut grads))?;
                epoch_total += loss.total;
                batch_count += loss.count;
            }
            epoch_count += batch_count;
            if batch_count == 0 {
                continue;
            }
            grads.scale(1.0 / batch_count as f64);
            if freeze_init {
                grads.init.weight.data_mut().fill(0.0);
                grads.init.bias.fill(0.0);
            }
            adam.update(model.params_mut(), grads.params())?;
        }
        let mean = epoch_total / epoch_count.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("decoder training loss at epoch {epoch}")));
        }
        curve.push(mean);
    }
    Ok(curve)
}

/// Builds and trains a decoder on `(embedding, caption)` pairs.
pub fn train_decoder(
    pairs: &[(EmbeddingVector, CaptionRecord)],
    vocab: &Vocabulary,
    config: &DecoderConfig,
) -> Result<(DecoderModel, Vec<f64>)> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::Empty("decoder training data".into()))?;
    let mut rng = seeded_rng(config.seed);
    let conditions: Vec<&[f64]> = pairs.iter().map(|(e, _)| e.as_slice()).collect();
    let normalization = if config.standardize {
        Some(ZScore::fit(&conditions)?)
    } else {
        None
    };
    let mut model = DecoderModel::init(first.0.dim(), vocab.clone(), config, &mut rng)?
        .with_normalization(normalization)?;
    let sequences: Vec<&[usize]> = pairs.iter().map(|(_, c)| c.tokens.as_slice()).collect();
    let curve = fit_sequences(&mut model, &conditions, &sequences, config, &mut rng, false)?;
    Ok((model, curve))
}
