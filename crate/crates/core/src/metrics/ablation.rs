//! Component ablation: how much the learned encoder and the embedding-space
//! supervision each contribute to caption quality.
//!
//! | variant        | learned encoder | embedding target |
//! |----------------|-----------------|------------------|
//! | `none`         | -               | -                |
//! | `encoder_only` | ✓               | -                |
//! | `full`         | ✓               | ✓                |

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate, EvalItem, EvalReport};
use crate::data::{Dataset, Split};
use crate::decoder::{fit_sequences, DecoderConfig, DecoderModel};
use crate::embedding::Embedder;
use crate::encoder::{train_rse, RseModel, RseTrainConfig, ZScore};
use crate::error::{Error, Result};
use crate::nn::{seeded_rng, AdamConfig, AdamState, Parameterized};
use crate::registry::Registry;
use crate::vocab::{Vocabulary, DEFAULT_MIN_FREQ};

/// Training settings shared by every variant so rows stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub encoder: RseTrainConfig,
    pub decoder: DecoderConfig,
    pub min_freq: usize,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            // linear encoder: the synthetic responses are a linear image of the embeddings
            encoder: RseTrainConfig {
                hidden: Vec::new(),
                ..RseTrainConfig::default()
            },
            decoder: DecoderConfig {
                embed_dim: 32,
                hidden: 64,
                ..DecoderConfig::default()
            },
            min_freq: DEFAULT_MIN_FREQ,
        }
    }
}

/// Test-split inputs and targets prepared once per dataset.
pub struct AblationData<'a> {
    pub dataset: &'a Dataset,
    pub vocab: Vocabulary,
    /// Train caption indices with their stimulus' z-scored response.
    train_captions: Vec<usize>,
    train_tokens: Vec<Vec<usize>>,
    train_stimuli: Vec<usize>,
    test_stimuli: Vec<usize>,
}

impl<'a> AblationData<'a> {
    pub fn new(dataset: &'a Dataset, min_freq: usize) -> Result<Self> {
        let train_captions = dataset.caption_indices(Split::Train);
        if train_captions.is_empty() {
            return Err(Error::Data("ablation needs captions in the train split".into()));
        }
        let test_stimuli: Vec<usize> = dataset
            .stimulus_indices(Split::Test)
            .into_iter()
            .filter(|&s| dataset.captions.iter().any(|c| c.stimulus == s))
            .collect();
        if test_stimuli.is_empty() {
            return Err(Error::Data("ablation needs captioned stimuli in the test split".into()));
        }
        let vocab = Vocabulary::build(&dataset.caption_texts(Split::Train), min_freq)?;
        let train_tokens = train_captions
            .iter()
            .map(|&c| vocab.encode(&dataset.captions[c].text))
            .collect();
        Ok(Self {
            dataset,
            vocab,
            train_captions,
            train_tokens,
            train_stimuli: dataset.stimulus_indices(Split::Train),
            test_stimuli,
        })
    }

    fn caption_stimulus(&self, k: usize) -> usize {
        self.dataset.captions[self.train_captions[k]].stimulus
    }

    /// Greedy captions for the test stimuli scored against their references.
    fn score(&self, model: &DecoderModel, conditions: &[Vec<f64>], embedder: &dyn Embedder) -> Result<EvalReport> {
        let predictions = conditions
            .iter()
            .map(|c| Ok(model.generate_caption(c)?.text))
            .collect::<Result<Vec<_>>>()?;
        let refs = self.dataset.references();
        let items: Vec<EvalItem<'_>> = self
            .test_stimuli
            .iter()
            .zip(&predictions)
            .zip(conditions)
            .map(|((&s, p), c)| EvalItem {
                stimulus_id: &self.dataset.stimuli[s].id,
                references: refs[&s].clone(),
                prediction: p,
                condition: c,
            })
            .collect();
        evaluate(model, embedder, &items, "")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantScores {
    pub sentence: f64,
    pub meteor: f64,
    pub perplexity: f64,
}

impl From<&EvalReport> for VariantScores {
    fn from(r: &EvalReport) -> Self {
        Self {
            sentence: r.mean_sentence,
            meteor: r.mean_meteor,
            perplexity: r.perplexity,
        }
    }
}

pub trait AblationVariant: Send + Sync {
    fn name(&self) -> &str;
    /// (learned encoder, embedding-space target)
    fn marks(&self) -> (bool, bool);
    fn run(
        &self,
        data: &AblationData<'_>,
        settings: &AblationSettings,
        seed: u64,
        embedder: &dyn Embedder,
    ) -> Result<VariantScores>;
}

/// Decoder conditioned on the z-scored response through its own random,
/// frozen initial-state projection. The response is already standardized,
/// so the decoder applies no further normalization.
pub struct NoEncoder;

impl AblationVariant for NoEncoder {
    fn name(&self) -> &str {
        "none"
    }

    fn marks(&self) -> (bool, bool) {
        (false, false)
    }

    fn run(&self, data: &AblationData<'_>, s: &AblationSettings, seed: u64, embedder: &dyn Embedder) -> Result<VariantScores> {
        let ds = data.dataset;
        let cfg = DecoderConfig { seed, ..s.decoder.clone() };
        let mut rng = seeded_rng(seed);
        let mut model = DecoderModel::init(ds.response_dim, data.vocab.clone(), &cfg, &mut rng)?;
        let conditions: Vec<Vec<f64>> = (0..data.train_captions.len())
            .map(|k| ds.normalized_response(data.caption_stimulus(k)))
            .collect();
        fit_sequences(&mut model, &conditions, &data.train_tokens, &cfg, &mut rng, true)?;
        let test: Vec<Vec<f64>> = data.test_stimuli.iter().map(|&i| ds.normalized_response(i)).collect();
        Ok((&data.score(&model, &test, embedder)?).into())
    }
}

/// Encoder and decoder trained jointly on caption loss alone.
pub struct EncoderOnly;

impl AblationVariant for EncoderOnly {
    fn name(&self) -> &str {
        "encoder_only"
    }

    fn marks(&self) -> (bool, bool) {
        (true, false)
    }

    fn run(&self, data: &AblationData<'_>, s: &AblationSettings, seed: u64, embedder: &dyn Embedder) -> Result<VariantScores> {
        let (encoder, decoder, _) = train_end_to_end(data, s, seed)?;
        let test = data
            .test_stimuli
            .iter()
            .map(|&i| Ok(encoder.predict_embedding(&data.dataset.stimuli[i].response)?.into_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok((&data.score(&decoder, &test, embedder)?).into())
    }
}

/// Encoder regressed onto embeddings, decoder trained on true embeddings and
/// evaluated on predicted ones.
pub struct FullPipeline;

impl AblationVariant for FullPipeline {
    fn name(&self) -> &str {
        "full"
    }

    fn marks(&self) -> (bool, bool) {
        (true, true)
    }

    fn run(&self, data: &AblationData<'_>, s: &AblationSettings, seed: u64, embedder: &dyn Embedder) -> Result<VariantScores> {
        let ds = data.dataset;
        let inputs: Vec<&[f64]> = data.train_stimuli.iter().map(|&i| ds.stimuli[i].response.as_slice()).collect();
        let targets: Vec<&[f64]> = data.train_stimuli.iter().map(|&i| ds.stimuli[i].embedding.as_slice()).collect();
        let (encoder, _) = train_rse(&inputs, &targets, &RseTrainConfig { seed, ..s.encoder.clone() })?;

        let cfg = DecoderConfig { seed, ..s.decoder.clone() };
        let mut rng = seeded_rng(seed);
        let conditions: Vec<&[f64]> = (0..data.train_captions.len())
            .map(|k| ds.stimuli[data.caption_stimulus(k)].embedding.as_slice())
            .collect();
        let normalization = if cfg.standardize {
            Some(ZScore::fit(&conditions)?)
        } else {
            None
        };
        let mut decoder = DecoderModel::init(ds.embedding_dim, data.vocab.clone(), &cfg, &mut rng)?
            .with_normalization(normalization)?;
        fit_sequences(&mut decoder, &conditions, &data.train_tokens, &cfg, &mut rng, false)?;

        let test = data
            .test_stimuli
            .iter()
            .map(|&i| Ok(encoder.predict_embedding(&ds.stimuli[i].response)?.into_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok((&data.score(&decoder, &test, embedder)?).into())
    }
}

/// Joint training: caption cross-entropy backpropagated through the decoder
/// into the encoder. The encoder output has the embedding dimension but is
/// never compared to an embedding.
pub fn train_end_to_end(
    data: &AblationData<'_>,
    s: &AblationSettings,
    seed: u64,
) -> Result<(RseModel, DecoderModel, Vec<f64>)> {
    let ds = data.dataset;
    let cfg = DecoderConfig { seed, ..s.decoder.clone() };
    let mut rng = seeded_rng(seed);
    let mut encoder = RseModel::init(ds.response_dim, ds.embedding_dim, &s.encoder.hidden, &mut rng);
    encoder.normalization = Some(ds.normalization.clone());
    let mut decoder = DecoderModel::init(ds.embedding_dim, data.vocab.clone(), &cfg, &mut rng)?;

    let inputs: Vec<Vec<f64>> = (0..data.train_captions.len())
        .map(|k| ds.normalized_response(data.caption_stimulus(k)))
        .collect();
    if cfg.standardize {
        // statistics of the untrained encoder's outputs, then held fixed
        let initial = inputs
            .iter()
            .map(|x| Ok(encoder.forward_cached(x)?.0))
            .collect::<Result<Vec<_>>>()?;
        decoder = decoder.with_normalization(Some(ZScore::fit(&initial)?))?;
    }
    let mut enc_adam = AdamState::for_params(AdamConfig::with_lr(s.encoder.lr), &encoder.params());
    let mut dec_adam = AdamState::for_params(AdamConfig::with_lr(cfg.lr), &decoder.params());
    let mut enc_grads = encoder.zero_grads();
    let mut dec_grads = decoder.zero_grads();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut epoch_count = 0;
        for batch in order.chunks(cfg.batch_size) {
            enc_grads.zero();
            dec_grads.zero();
            let mut count = 0;
            for &k in batch {
                let (cond, caches) = encoder.forward_cached(&inputs[k])?;
                let loss = decoder.sequence_loss(&cond, &data.train_tokens[k], Some(&mut dec_grads))?;
                encoder.backward(&caches, &loss.d_condition, &mut enc_grads);
                total += loss.total;
                count += loss.count;
            }
            epoch_count += count;
            if count == 0 {
                continue;
            }
            let scale = 1.0 / count as f64;
            enc_grads.scale(scale);
            dec_grads.scale(scale);
            enc_adam.update(encoder.params_mut(), enc_grads.params())?;
            dec_adam.update(decoder.params_mut(), dec_grads.params())?;
        }
        let mean = total / epoch_count.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("end-to-end training loss at epoch {epoch}")));
        }
        curve.push(mean);
    }
    Ok((encoder, decoder, curve))
}

pub fn ablation_registry() -> Registry<dyn AblationVariant> {
    let mut r: Registry<dyn AblationVariant> = Registry::new("ablation variant");
    r.register("none", Arc::new(NoEncoder));
    r.register("encoder_only", Arc::new(EncoderOnly));
    r.register("full", Arc::new(FullPipeline));
    r
}

/// Table rows in their canonical order.
pub const VARIANT_ORDER: [&str; 3] = ["none", "encoder_only", "full"];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub variant: String,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub encoder: bool,
    pub embedding: bool,
    /// Medians over seeds.
    pub median: VariantScores,
    pub per_seed: Vec<(u64, VariantScores)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Trains and evaluates each configured variant once per seed.
pub fn run_ablation(
    dataset: &Dataset,
    configs: &[AblationConfig],
    settings: &AblationSettings,
    embedder: &dyn Embedder,
) -> Result<AblationTable> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("no ablation variants requested".into()));
    }
    let registry = ablation_registry();
    let data = AblationData::new(dataset, settings.min_freq)?;
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        if cfg.seeds.is_empty() {
            return Err(Error::InvalidArgument(format!("variant {} has no seeds", cfg.variant)));
        }
        let variant = registry.get(&cfg.variant)?;
        let per_seed = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let scores = variant.run(&data, settings, seed, embedder).map_err(|e| match e {
                    Error::NonFinite(m) => Error::NonFinite(format!("variant {}: {m}", cfg.variant)),
                    other => other,
                })?;
                Ok((seed, scores))
            })
            .collect::<Result<Vec<_>>>()?;
        let pick = |f: fn(&VariantScores) -> f64| median(per_seed.iter().map(|(_, s)| f(s)).collect());
        let (encoder, embedding) = variant.marks();
        rows.push(AblationRow {
            variant: cfg.variant.clone(),
            encoder,
            embedding,
            median: VariantScores {
                sentence: pick(|s| s.sentence),
                meteor: pick(|s| s.meteor),
                perplexity: pick(|s| s.perplexity),
            },
            per_seed,
        });
    }
    Ok(AblationTable { rows })
}

impl AblationTable {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_tsv(&self) -> String {
        let mark = |b: bool| if b { "✓" } else { "-" };
        let mut out = String::from("variant\tencoder_decoder\tembedding\tsentence\tmeteor\tperplexity\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.variant,
                mark(r.encoder),
                mark(r.embedding),
                r.median.sentence,
                r.median.meteor,
                r.median.perplexity
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn registry_has_all_rows() {
        let r = ablation_registry();
        for v in VARIANT_ORDER {
            assert!(r.contains(v));
        }
        assert!(r.get("bogus").is_err());
    }
}
