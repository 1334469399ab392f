//! The contextual embedding space: vectors, cosine similarity, embedders,
//! a labelled store and the nearest-neighbour reverse-embedding baseline.

mod embedder;
mod store;

pub use embedder::{
    embedder_registry, Embedder, EmbedderConfig, EmbedderFactory, FileLookupEmbedder,
    HashBagEmbedder, DEFAULT_HASHBAG_SEED,
};
pub use store::{EmbeddingRecord, EmbeddingStore, Neighbor};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::nn::{dot, norm};

/// Default dimensionality of the embedding space.
pub const DEFAULT_DIM: usize = 1536;

/// A finite point in the embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure_finite("embedding vector", &values)?;
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `(a·b) / (‖a‖‖b‖)`, clamped to [−1, 1]. Zero-norm inputs are an error.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_len("cosine similarity", a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument(
            "cosine similarity of a zero-norm vector".into(),
        ));
    }
    let sim = dot(a, b) / (na * nb);
    if !sim.is_finite() {
        return Err(Error::NonFinite("cosine similarity".into()));
    }
    Ok(sim.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((s - 0.7071067811865475).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            b in proptest::collection::vec(-10.0f64..10.0, 6),
            alpha in 0.01f64..100.0,
        ) {
            prop_assume!(norm(&a) > 1e-6 && norm(&b) > 1e-6);
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            let scaled: Vec<f64> = a.iter().map(|v| v * alpha).collect();
            let sb = cosine_similarity(&scaled, &b).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((ab - sb).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
