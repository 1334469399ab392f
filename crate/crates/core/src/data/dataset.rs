use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::captions::{parse_captions, CaptionRow};
use super::container::{VectorFile, VectorKind};
use super::io::{read_bytes, sha256_hex};
use super::manifest::DatasetManifest;
use crate::encoder::ZScore;
use crate::error::{Error, Result};
use crate::vocab::{CaptionRecord, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub id: String,
    pub response: Vec<f64>,
    pub embedding: Vec<f64>,
    pub label: Option<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Caption {
    /// Index into [`Dataset::stimuli`].
    pub stimulus: usize,
    pub subject_id: String,
    pub text: String,
}

/// Validated, cross-referenced dataset held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub response_dim: usize,
    pub embedding_dim: usize,
    pub stimuli: Vec<Stimulus>,
    pub captions: Vec<Caption>,
    /// Standardization statistics of the train split only.
    pub normalization: ZScore,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn assemble(
        manifest: DatasetManifest,
        responses: VectorFile,
        embeddings: VectorFile,
        captions: Vec<CaptionRow>,
    ) -> Result<Self> {
        let mut split_of: HashMap<&str, Split> = HashMap::new();
        for (ids, split) in [(&manifest.split.train, Split::Train), (&manifest.split.test, Split::Test)] {
            for id in ids {
                if split_of.insert(id.as_str(), split).is_some() {
                    return Err(Error::Data(format!("stimulus {id:?} listed twice in the split")));
                }
            }
        }

        let embedding_by_id: HashMap<&str, &Vec<f64>> =
            embeddings.records.iter().map(|(id, v)| (id.as_str(), v)).collect();
        let mut seen = HashSet::new();
        let mut stimuli = Vec::with_capacity(responses.records.len());
        for (id, response) in &responses.records {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate response id {id:?}")));
            }
            let split = *split_of
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("stimulus {id:?} is in no split")))?;
            let embedding = embedding_by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("stimulus {id:?} has no embedding")))?;
            stimuli.push(Stimulus {
                id: id.clone(),
                response: response.clone(),
                embedding: (*embedding).clone(),
                label: manifest.labels.get(id).cloned(),
                split,
            });
        }
        for id in split_of.keys() {
            if !seen.contains(id) {
                return Err(Error::Data(format!("split lists stimulus {id:?} missing from responses")));
            }
        }

        let index: HashMap<&str, usize> = stimuli
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let captions = captions
            .into_iter()
            .map(|row| {
                let stimulus = *index.get(row.stimulus_id.as_str()).ok_or_else(|| {
                    Error::Data(format!(
                        "caption references stimulus {:?} missing from responses",
                        row.stimulus_id
                    ))
                })?;
                Ok(Caption {
                    stimulus,
                    subject_id: row.subject_id,
                    text: row.caption,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let train_rows: Vec<&[f64]> = stimuli
            .iter()
            .filter(|s| s.split == Split::Train)
            .map(|s| s.response.as_slice())
            .collect();
        if train_rows.is_empty() {
            return Err(Error::Data("train split is empty".into()));
        }
        let normalization = ZScore::fit(&train_rows)?;

        Ok(Self {
            response_dim: responses.dim,
            embedding_dim: embeddings.dim,
            stimuli,
            captions,
            normalization,
            manifest,
        })
    }

    pub fn stimulus_indices(&self, split: Split) -> Vec<usize> {
        (0..self.stimuli.len())
            .filter(|&i| self.stimuli[i].split == split)
            .collect()
    }

    pub fn caption_indices(&self, split: Split) -> Vec<usize> {
        (0..self.captions.len())
            .filter(|&i| self.stimuli[self.captions[i].stimulus].split == split)
            .collect()
    }

    pub fn caption_texts(&self, split: Split) -> Vec<&str> {
        self.caption_indices(split)
            .into_iter()
            .map(|i| self.captions[i].text.as_str())
            .collect()
    }

    pub fn caption_record(&self, vocab: &Vocabulary, caption: usize) -> CaptionRecord {
        let c = &self.captions[caption];
        CaptionRecord::new(vocab, &self.stimuli[c.stimulus].id, &c.subject_id, &c.text)
    }

    /// References grouped by stimulus index.
    pub fn references(&self) -> HashMap<usize, Vec<&str>> {
        let mut out: HashMap<usize, Vec<&str>> = HashMap::new();
        for c in &self.captions {
            out.entry(c.stimulus).or_default().push(&c.text);
        }
        out
    }

    pub fn normalized_response(&self, stimulus: usize) -> Vec<f64> {
        self.normalization
            .apply(&self.stimuli[stimulus].response)
            .expect("dimension validated at load")
    }
}

/// Loads and validates the dataset described by a manifest file.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let load = |role: &str, relative: &str| -> Result<Vec<u8>> {
        let bytes = read_bytes(&DatasetManifest::resolve(manifest_path, relative))?;
        if let Some(expected) = manifest.checksums.get(role) {
            let actual = sha256_hex(&bytes);
            if &actual != expected {
                return Err(Error::Data(format!(
                    "checksum mismatch for {role} file {relative}: expected {expected}, found {actual}"
                )));
            }
        }
        Ok(bytes)
    };
    let responses = VectorFile::from_bytes(&load("responses", &manifest.responses)?, VectorKind::Responses)?;
    let embeddings = VectorFile::from_bytes(&load("embeddings", &manifest.embeddings)?, VectorKind::Embeddings)?;
    let caption_bytes = load("captions", &manifest.captions)?;
    let caption_text = String::from_utf8(caption_bytes)
        .map_err(|_| Error::Format("caption file is not UTF-8".into()))?;
    let captions = parse_captions(&caption_text)?;
    Dataset::assemble(manifest, responses, embeddings, captions)
}
