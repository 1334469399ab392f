use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::write_atomic;
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitLists {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Generation parameters recorded for synthetic datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMetadata {
    pub seed: u64,
    pub noise: f64,
    pub concepts: usize,
    pub per_concept: usize,
    pub dim: usize,
    pub response_dim: usize,
    pub embedder: String,
    pub embedder_seed: u64,
}

/// Points at the response, embedding and caption files of one dataset and
/// fixes its train/test split. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub responses: String,
    pub embeddings: String,
    pub captions: String,
    /// SHA-256 (hex) of each referenced file, keyed by role.
    #[serde(default)]
    pub checksums: BTreeMap<String, String>,
    pub split: SplitLists,
    /// Optional category label per stimulus.
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticMetadata>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {} (this build reads {MANIFEST_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn resolve(manifest_path: &Path, relative: &str) -> PathBuf {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(relative)
    }
}
