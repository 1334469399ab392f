//! Model checkpoints.
//!
//! ```text
//! magic        4 bytes  "NCKP"
//! version      u32 LE
//! kind         u8       0 = encoder, 1 = decoder
//! vocab hash   32 bytes (zero for encoders)
//! config       u32 LE length + UTF-8 JSON
//! tensors      u32 LE count, then per tensor:
//!              u16 LE name length, name, u32 LE rows, u32 LE cols, rows×cols f64 LE
//! digest       32 bytes SHA-256 of everything above
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::{read_bytes, write_atomic, Reader};
use crate::decoder::{DecoderConfig, DecoderModel};
use crate::encoder::{RseModel, RseTrainConfig, ZScore};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, LstmCell, Tensor2};
use crate::vocab::Vocabulary;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rse,
    Decoder,
}

impl ModelKind {
    fn code(self) -> u8 {
        match self {
            ModelKind::Rse => 0,
            ModelKind::Decoder => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ModelKind::Rse),
            1 => Ok(ModelKind::Decoder),
            other => Err(Error::Format(format!("unknown checkpoint model kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerShape {
    input: usize,
    output: usize,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RseCheckpointConfig {
    layers: Vec<LayerShape>,
    normalized: bool,
    #[serde(default)]
    pub training: Option<RseTrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderCheckpointConfig {
    condition_dim: usize,
    embed_dim: usize,
    hidden: usize,
    max_len: usize,
    vocab_min_freq: usize,
    vocab: Vec<String>,
    normalized: bool,
    #[serde(default)]
    pub training: Option<DecoderConfig>,
}

/// Raw decoded checkpoint before it is turned into a model.
struct RawCheckpoint {
    kind: ModelKind,
    vocab_hash: [u8; 32],
    config: String,
    tensors: BTreeMap<String, Tensor2>,
}

struct Writer {
    out: Vec<u8>,
}

impl Writer {
    fn new(kind: ModelKind, vocab_hash: [u8; 32], config: &str) -> Result<Self> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(kind.code());
        out.extend_from_slice(&vocab_hash);
        out.extend_from_slice(&len_u32(config.len(), "config")?.to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        Ok(Self { out })
    }

    fn tensors(mut self, tensors: &[(String, Tensor2)]) -> Result<Vec<u8>> {
        self.out.extend_from_slice(&len_u32(tensors.len(), "tensor count")?.to_le_bytes());
        for (name, t) in tensors {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::InvalidArgument(format!("tensor name too long: {name}")))?;
            self.out.extend_from_slice(&name_len.to_le_bytes());
            self.out.extend_from_slice(name.as_bytes());
            self.out.extend_from_slice(&len_u32(t.rows(), "tensor rows")?.to_le_bytes());
            self.out.extend_from_slice(&len_u32(t.cols(), "tensor cols")?.to_le_bytes());
            for v in t.data() {
                self.out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&self.out);
        self.out.extend_from_slice(&digest);
        Ok(self.out)
    }
}

fn len_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} exceeds u32")))
}

fn row(v: &[f64]) -> Tensor2 {
    Tensor2::from_vec(1, v.len(), v.to_vec()).expect("shape matches length")
}

fn parse_raw(bytes: &[u8]) -> Result<RawCheckpoint> {
    if bytes.len() < 32 {
        return Err(Error::Format("checkpoint truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let mut r = Reader::new(body, "checkpoint");
    let magic: [u8; 4] = r.array()?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (this build reads {CHECKPOINT_VERSION})"
        )));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Format("checkpoint corrupted (digest mismatch)".into()));
    }
    let kind = ModelKind::from_code(r.u8()?)?;
    let vocab_hash: [u8; 32] = r.array()?;
    let config_len = r.u32()? as usize;
    let config = r.utf8(config_len)?;
    let count = r.u32()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = r.utf8(name_len)?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format(format!("tensor {name} shape overflows")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let t = Tensor2::from_vec(rows, cols, data)
            .map_err(|e| Error::Format(format!("tensor {name}: {e}")))?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
    }
    r.finish()?;
    Ok(RawCheckpoint {
        kind,
        vocab_hash,
        config,
        tensors,
    })
}

impl RawCheckpoint {
    fn take(&mut self, name: &str, rows: usize, cols: usize) -> Result<Tensor2> {
        let t = self
            .tensors
            .remove(name)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {name}")))?;
        if t.shape() != (rows, cols) {
            return Err(Error::Format(format!(
                "tensor {name} has shape {:?}, expected {:?}",
                t.shape(),
                (rows, cols)
            )));
        }
        Ok(t)
    }

    fn take_vec(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        Ok(self.take(name, 1, len)?.into_vec())
    }

    fn take_dense(&mut self, prefix: &str, input: usize, output: usize, act: Activation) -> Result<DenseLayer> {
        let w = self.take(&format!("{prefix}.weight"), output, input)?;
        let b = self.take_vec(&format!("{prefix}.bias"), output)?;
        DenseLayer::new(w, b, act)
    }

    fn finish(&self) -> Result<()> {
        match self.tensors.keys().next() {
            Some(extra) => Err(Error::Format(format!("unexpected tensor {extra}"))),
            None => Ok(()),
        }
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!(
                "checkpoint holds a {:?} model, expected {:?}",
                self.kind, kind
            )));
        }
        Ok(())
    }
}

fn dense_tensors(prefix: &str, layer: &DenseLayer, out: &mut Vec<(String, Tensor2)>) {
    out.push((format!("{prefix}.weight"), layer.weight.clone()));
    out.push((format!("{prefix}.bias"), row(&layer.bias)));
}

pub fn rse_to_bytes(model: &RseModel, training: Option<&RseTrainConfig>) -> Result<Vec<u8>> {
    let config = RseCheckpointConfig {
        layers: model
            .layers
            .iter()
            .map(|l| LayerShape {
                input: l.input_dim(),
                output: l.output_dim(),
                activation: l.activation,
            })
            .collect(),
        normalized: model.normalization.is_some(),
        training: training.cloned(),
    };
    let mut tensors = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        dense_tensors(&format!("layer{i}"), layer, &mut tensors);
    }
    if let Some(z) = &model.normalization {
        tensors.push(("norm.mean".into(), row(&z.mean)));
        tensors.push(("norm.std".into(), row(&z.std)));
    }
    Writer::new(ModelKind::Rse, [0; 32], &serde_json::to_string(&config)?)?.tensors(&tensors)
}

pub fn rse_from_bytes(bytes: &[u8]) -> Result<(RseModel, RseCheckpointConfig)> {
    let mut raw = parse_raw(bytes)?;
    raw.expect_kind(ModelKind::Rse)?;
    let config: RseCheckpointConfig =
        serde_json::from_str(&raw.config).map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    let layers = config
        .layers
        .iter()
        .enumerate()
        .map(|(i, s)| raw.take_dense(&format!("layer{i}"), s.input, s.output, s.activation))
        .collect::<Result<Vec<_>>>()?;
    let normalization = if config.normalized {
        let dim = layers.first().map_or(0, DenseLayer::input_dim);
        Some(ZScore {
            mean: raw.take_vec("norm.mean", dim)?,
            std: raw.take_vec("norm.std", dim)?,
        })
    } else {
        None
    };
    raw.finish()?;
    let model = RseModel::new(layers, normalization).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    Ok((model, config))
}

pub fn decoder_to_bytes(model: &DecoderModel, training: Option<&DecoderConfig>) -> Result<Vec<u8>> {
    let config = DecoderCheckpointConfig {
        condition_dim: model.condition_dim(),
        embed_dim: model.lstm.input_dim,
        hidden: model.lstm.hidden_dim,
        max_len: model.max_len,
        vocab_min_freq: model.vocab.min_freq(),
        vocab: model.vocab.tokens().to_vec(),
        normalized: model.normalization.is_some(),
        training: training.cloned(),
    };
    let mut tensors = Vec::new();
    dense_tensors("init", &model.init, &mut tensors);
    tensors.push(("token_embedding".into(), model.token_embedding.clone()));
    let l = &model.lstm;
    for (name, w) in [("w_i", &l.w_i), ("w_f", &l.w_f), ("w_o", &l.w_o), ("w_g", &l.w_g)] {
        tensors.push((format!("lstm.{name}"), w.clone()));
    }
    for (name, b) in [("b_i", &l.b_i), ("b_f", &l.b_f), ("b_o", &l.b_o), ("b_g", &l.b_g)] {
        tensors.push((format!("lstm.{name}"), row(b)));
    }
    dense_tensors("output", &model.output, &mut tensors);
    if let Some(z) = &model.normalization {
        tensors.push(("norm.mean".into(), row(&z.mean)));
        tensors.push(("norm.std".into(), row(&z.std)));
    }
    Writer::new(ModelKind::Decoder, model.vocab.hash(), &serde_json::to_string(&config)?)?.tensors(&tensors)
}

/// Decodes a decoder checkpoint. With `expected_vocab`, refuses a checkpoint
/// trained against a different vocabulary.
pub fn decoder_from_bytes(
    bytes: &[u8],
    expected_vocab: Option<&Vocabulary>,
) -> Result<(DecoderModel, DecoderCheckpointConfig)> {
    let mut raw = parse_raw(bytes)?;
    raw.expect_kind(ModelKind::Decoder)?;
    if let Some(v) = expected_vocab {
        if v.hash() != raw.vocab_hash {
            return Err(Error::Data(format!(
                "decoder checkpoint was trained with vocabulary {} but {} was supplied",
                hex::encode(raw.vocab_hash),
                hex::encode(v.hash())
            )));
        }
    }
    let config: DecoderCheckpointConfig =
        serde_json::from_str(&raw.config).map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    let vocab = Vocabulary::from_tokens(config.vocab.clone(), config.vocab_min_freq)?;
    if vocab.hash() != raw.vocab_hash {
        return Err(Error::Format("embedded vocabulary does not match its recorded hash".into()));
    }
    let (d, e, h, v) = (config.condition_dim, config.embed_dim, config.hidden, vocab.len());
    let init = raw.take_dense("init", d, h, Activation::Tanh)?;
    let token_embedding = raw.take("token_embedding", v, e)?;
    let mut lstm = LstmCell::zeros(e, h);
    lstm.w_i = raw.take("lstm.w_i", h, e + h)?;
    lstm.w_f = raw.take("lstm.w_f", h, e + h)?;
    lstm.w_o = raw.take("lstm.w_o", h, e + h)?;
    lstm.w_g = raw.take("lstm.w_g", h, e + h)?;
    lstm.b_i = raw.take_vec("lstm.b_i", h)?;
    lstm.b_f = raw.take_vec("lstm.b_f", h)?;
    lstm.b_o = raw.take_vec("lstm.b_o", h)?;
    lstm.b_g = raw.take_vec("lstm.b_g", h)?;
    let output = raw.take_dense("output", h, v, Activation::Identity)?;
    let normalization = if config.normalized {
        Some(ZScore {
            mean: raw.take_vec("norm.mean", d)?,
            std: raw.take_vec("norm.std", d)?,
        })
    } else {
        None
    };
    raw.finish()?;
    let model = DecoderModel::new(init, token_embedding, lstm, output, vocab, config.max_len)
        .and_then(|m| m.with_normalization(normalization))
        .map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    Ok((model, config))
}

/// Kind of model stored in a checkpoint, validated end to end.
pub fn checkpoint_kind(bytes: &[u8]) -> Result<ModelKind> {
    Ok(parse_raw(bytes)?.kind)
}

pub fn save_rse(path: &Path, model: &RseModel, training: Option<&RseTrainConfig>) -> Result<()> {
    write_atomic(path, &rse_to_bytes(model, training)?)
}

pub fn load_rse(path: &Path) -> Result<RseModel> {
    Ok(rse_from_bytes(&read_bytes(path)?)?.0)
}

pub fn save_decoder(path: &Path, model: &DecoderModel, training: Option<&DecoderConfig>) -> Result<()> {
    write_atomic(path, &decoder_to_bytes(model, training)?)
}

pub fn load_decoder(path: &Path, expected_vocab: Option<&Vocabulary>) -> Result<DecoderModel> {
    Ok(decoder_from_bytes(&read_bytes(path)?, expected_vocab)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded_rng;

    fn rse() -> RseModel {
        let mut rng = seeded_rng(3);
        let mut m = RseModel::init(5, 3, &[4], &mut rng);
        m.normalization = Some(ZScore {
            mean: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            std: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        });
        m
    }

    fn decoder() -> DecoderModel {
        let vocab = Vocabulary::build(&["a red cat", "a blue dog"], 1).unwrap();
        let cfg = DecoderConfig {
            embed_dim: 3,
            hidden: 4,
            ..DecoderConfig::default()
        };
        DecoderModel::init(5, vocab, &cfg, &mut seeded_rng(9))
            .unwrap()
            .with_normalization(Some(ZScore {
                mean: vec![0.0, 1.0, 2.0, 3.0, 4.0],
                std: vec![0.5; 5],
            }))
            .unwrap()
    }

    #[test]
    fn rse_round_trip_bit_exact() {
        let m = rse();
        let cfg = RseTrainConfig::default();
        let bytes = rse_to_bytes(&m, Some(&cfg)).unwrap();
        let (back, meta) = rse_from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta.training, Some(cfg));
        assert_eq!(checkpoint_kind(&bytes).unwrap(), ModelKind::Rse);
    }

    #[test]
    fn decoder_round_trip_bit_exact() {
        let m = decoder();
        let bytes = decoder_to_bytes(&m, None).unwrap();
        let (back, _) = decoder_from_bytes(&bytes, Some(&m.vocab)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn wrong_vocabulary_refused() {
        let m = decoder();
        let bytes = decoder_to_bytes(&m, None).unwrap();
        let other = Vocabulary::build(&["a red cat", "a green dog"], 1).unwrap();
        assert!(matches!(decoder_from_bytes(&bytes, Some(&other)), Err(Error::Data(_))));
    }

    #[test]
    fn truncation_and_corruption() {
        let bytes = rse_to_bytes(&rse(), None).unwrap();
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(rse_from_bytes(&bytes[..cut]), Err(Error::Format(_))));
        }
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0x40;
        assert!(matches!(rse_from_bytes(&flipped), Err(Error::Format(_))));
        let mut versioned = bytes.clone();
        versioned[4] = 2;
        let err = rse_from_bytes(&versioned).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn kind_mismatch() {
        let bytes = rse_to_bytes(&rse(), None).unwrap();
        assert!(decoder_from_bytes(&bytes, None).is_err());
    }
}
