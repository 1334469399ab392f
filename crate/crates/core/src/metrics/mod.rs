//! Caption metrics and evaluation reports.

pub mod ablation;
pub mod meteor;

use std::fmt::Write as _;

pub use meteor::{meteor, meteor_tokens};

use crate::decoder::DecoderModel;
use crate::embedding::{cosine_similarity, Embedder};
use crate::error::{Error, Result};
use crate::vocab::tokenize;

/// Cosine similarity of the two texts' embeddings.
pub fn sentence_similarity(embedder: &dyn Embedder, reference: &str, hypothesis: &str) -> Result<f64> {
    let a = embedder.embed(reference)?;
    let b = embedder.embed(hypothesis)?;
    cosine_similarity(a.as_slice(), b.as_slice())
}

/// `exp(−mean log p)` over the given per-token log-probabilities.
pub fn perplexity_from_log_probs(log_probs: &[f64]) -> Result<f64> {
    if log_probs.is_empty() {
        return Err(Error::Empty("perplexity over zero tokens".into()));
    }
    let mean = log_probs.iter().sum::<f64>() / log_probs.len() as f64;
    let ppl = (-mean).exp();
    if !ppl.is_finite() {
        return Err(Error::NonFinite("perplexity".into()));
    }
    Ok(ppl)
}

/// Teacher-forced perplexity of `model` over `(conditioning, caption)` pairs.
pub fn perplexity<C: AsRef<[f64]>, S: AsRef<str>>(model: &DecoderModel, pairs: &[(C, S)]) -> Result<f64> {
    let mut all = Vec::new();
    for (cond, caption) in pairs {
        let target = model.vocab.encode(caption.as_ref());
        all.extend(model.token_log_likelihoods(cond.as_ref(), &target)?);
    }
    perplexity_from_log_probs(&all)
}

/// One prediction to score against its references.
#[derive(Debug, Clone)]
pub struct EvalItem<'a> {
    pub stimulus_id: &'a str,
    pub references: Vec<&'a str>,
    pub prediction: &'a str,
    /// Decoder conditioning vector used for perplexity.
    pub condition: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub stimulus_id: String,
    pub reference: String,
    pub prediction: String,
    pub meteor: f64,
    pub sentence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<PairRecord>,
    pub mean_meteor: f64,
    pub mean_sentence: f64,
    pub perplexity: f64,
    pub fingerprint: String,
}

/// Scores each item against the reference with the highest METEOR (first on
/// ties). A prediction without tokens gets sentence similarity 0.
pub fn evaluate(
    model: &DecoderModel,
    embedder: &dyn Embedder,
    items: &[EvalItem<'_>],
    fingerprint: &str,
) -> Result<EvalReport> {
    if items.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut records = Vec::with_capacity(items.len());
    let mut log_probs = Vec::new();
    for item in items {
        if item.references.is_empty() {
            return Err(Error::Data(format!("stimulus {:?} has no reference caption", item.stimulus_id)));
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (i, r) in item.references.iter().enumerate() {
            let m = meteor(r, item.prediction);
            if m > best.1 {
                best = (i, m);
            }
        }
        let reference = item.references[best.0];
        let sentence = if tokenize(item.prediction).is_empty() {
            0.0
        } else {
            sentence_similarity(embedder, reference, item.prediction)?
        };
        for r in &item.references {
            log_probs.extend(model.token_log_likelihoods(item.condition, &model.vocab.encode(r))?);
        }
        records.push(PairRecord {
            stimulus_id: item.stimulus_id.to_string(),
            reference: reference.to_string(),
            prediction: item.prediction.to_string(),
            meteor: best.1,
            sentence,
        });
    }
    let n = records.len() as f64;
    Ok(EvalReport {
        mean_meteor: records.iter().map(|r| r.meteor).sum::<f64>() / n,
        mean_sentence: records.iter().map(|r| r.sentence).sum::<f64>() / n,
        perplexity: perplexity_from_log_probs(&log_probs)?,
        records,
        fingerprint: fingerprint.to_string(),
    })
}

impl EvalReport {
    /// Per-pair rows followed by a `#`-prefixed summary block.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fingerprint\t{}", self.fingerprint);
        out.push_str("stimulus_id\treference\tprediction\tmeteor\tsentence\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.stimulus_id, r.reference, r.prediction, r.meteor, r.sentence
            );
        }
        let _ = writeln!(out, "# pairs\t{}", self.records.len());
        let _ = writeln!(out, "# mean_meteor\t{}", self.mean_meteor);
        let _ = writeln!(out, "# mean_sentence\t{}", self.mean_sentence);
        let _ = writeln!(out, "# perplexity\t{}", self.perplexity);
        out
    }
}
