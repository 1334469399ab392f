use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EmbeddingStore, EmbeddingVector};
use crate::error::{Error, Result};
use crate::nn::{axpy, norm, Rng};
use crate::registry::Registry;
use crate::vocab::tokenize;

pub const DEFAULT_HASHBAG_SEED: u64 = 0x05ee_dba9;

/// Maps text to a point in the embedding space.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Bag-of-tokens embedder: every token hashes to a fixed random unit vector,
/// and a text embeds to the normalized sum of its token vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashBagEmbedder {
    dim: usize,
    seed: u64,
}

impl HashBagEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be ≥ 1".into()));
        }
        Ok(Self { dim, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest[..32]);
        let mut rng = Rng::from_seed(key);
        loop {
            let v: Vec<f64> = (0..self.dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let n = norm(&v);
            if n > 0.0 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }
}

impl Embedder for HashBagEmbedder {
    fn name(&self) -> &str {
        "hashbag"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Empty(format!("no tokens in {text:?}")));
        }
        let mut sum = vec![0.0; self.dim];
        for t in &tokens {
            axpy(1.0, &self.token_vector(t), &mut sum);
        }
        let n = norm(&sum);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NonFinite(format!("hash-bag embedding of {text:?}")));
        }
        sum.iter_mut().for_each(|v| *v /= n);
        EmbeddingVector::new(sum)
    }
}

/// Exact-match lookup into a table of precomputed embeddings keyed by text.
#[derive(Debug, Clone)]
pub struct FileLookupEmbedder {
    dim: usize,
    table: HashMap<String, EmbeddingVector>,
}

impl FileLookupEmbedder {
    pub fn from_store(store: &EmbeddingStore) -> Self {
        Self {
            dim: store.dim(),
            table: store
                .iter()
                .map(|r| (r.id.clone(), r.vector.clone()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Embedder for FileLookupEmbedder {
    fn name(&self) -> &str {
        "file"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| Error::UnknownText(text.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub seed: u64,
    /// Embedding TSV backing the `file` embedder.
    pub table: Option<PathBuf>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dim: super::DEFAULT_DIM,
            seed: DEFAULT_HASHBAG_SEED,
            table: None,
        }
    }
}

pub type EmbedderFactory = dyn Fn(&EmbedderConfig) -> Result<Box<dyn Embedder>> + Send + Sync;

/// Built-in embedders: `hashbag` and `file`.
pub fn embedder_registry() -> Registry<EmbedderFactory> {
    let mut reg: Registry<EmbedderFactory> = Registry::new("embedder");
    reg.register(
        "hashbag",
        Arc::new(|cfg: &EmbedderConfig| {
            Ok(Box::new(HashBagEmbedder::new(cfg.dim, cfg.seed)?) as Box<dyn Embedder>)
        }),
    );
    reg.register(
        "file",
        Arc::new(|cfg: &EmbedderConfig| {
            let path = cfg.table.as_ref().ok_or_else(|| {
                Error::InvalidArgument("file embedder needs an embedding table path".into())
            })?;
            let store = EmbeddingStore::read_tsv(path)?;
            Ok(Box::new(FileLookupEmbedder::from_store(&store)) as Box<dyn Embedder>)
        }),
    );
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{cosine_similarity, EmbeddingRecord};

    fn sim(e: &HashBagEmbedder, a: &str, b: &str) -> f64 {
        cosine_similarity(e.embed(a).unwrap().as_slice(), e.embed(b).unwrap().as_slice()).unwrap()
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashBagEmbedder::new(32, 7).unwrap();
        let first = e.embed("A red cat").unwrap();
        for _ in 0..1000 {
            assert_eq!(e.embed("A red cat").unwrap(), first);
        }
        assert!((norm(first.as_slice()) - 1.0).abs() < 1e-12);
        assert_eq!(first.dim(), 32);
        // normalization is inherited from tokenize
        assert_eq!(e.embed("a RED cat!").unwrap(), first);
    }

    #[test]
    fn overlap_raises_similarity() {
        let e = HashBagEmbedder::new(32, DEFAULT_HASHBAG_SEED).unwrap();
        assert!(sim(&e, "a red cat", "a red dog") > sim(&e, "a red cat", "blue bird flies"));
        assert!((sim(&e, "some text here", "some text here") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_rejected() {
        let e = HashBagEmbedder::new(8, 1).unwrap();
        assert!(matches!(e.embed(" ... "), Err(Error::Empty(_))));
    }

    #[test]
    fn lookup_miss_is_error() {
        let mut store = EmbeddingStore::new(2);
        store
            .insert(EmbeddingRecord::new("a cat", vec![1.0, 0.0], None).unwrap())
            .unwrap();
        let e = FileLookupEmbedder::from_store(&store);
        assert_eq!(e.embed("a cat").unwrap().as_slice(), &[1.0, 0.0]);
        assert!(matches!(e.embed("a dog"), Err(Error::UnknownText(_))));
    }

    #[test]
    fn registry_builds_hashbag() {
        let reg = embedder_registry();
        assert_eq!(reg.names(), vec!["file", "hashbag"]);
        let cfg = EmbedderConfig {
            dim: 16,
            ..Default::default()
        };
        let e = (reg.get("hashbag").unwrap())(&cfg).unwrap();
        assert_eq!(e.dim(), 16);
        assert!((reg.get("file").unwrap())(&cfg).is_err());
    }
}
