//! File formats, synthetic data, dataset loading and checkpoints.

pub mod captions;
pub mod checkpoint;
pub mod container;
pub mod dataset;
pub mod io;
pub mod manifest;
pub mod synthetic;

pub use captions::{captions_to_tsv, parse_captions, read_captions, CaptionRow};
pub use checkpoint::{load_decoder, load_rse, save_decoder, save_rse, ModelKind};
pub use container::{VectorFile, VectorKind, CONTAINER_VERSION};
pub use dataset::{load_dataset, Dataset, Split};
pub use io::{sha256_hex, write_atomic};
pub use manifest::{DatasetManifest, MANIFEST_VERSION};
pub use synthetic::{generate_synthetic, SyntheticDataset, SyntheticSpec};
