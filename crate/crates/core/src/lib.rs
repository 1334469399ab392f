//! Caption generation from neural response vectors.
//!
//! Response vectors are mapped into a contextual text-embedding space by a
//! feed-forward encoder, and a one-to-many LSTM decodes captions from that
//! space. The crate also carries caption metrics, an ablation harness,
//! PCA / t-SNE projections and the file formats and CLI around them.

pub mod cli;
pub mod data;
pub mod decoder;
pub mod embedding;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod registry;
pub mod viz;
pub mod vocab;

pub use error::{Error, Result};
