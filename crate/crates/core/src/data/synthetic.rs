//! Seeded synthetic corpus: concept-specific caption grammars, hash-bag
//! embeddings of those captions, and responses that are a noisy linear
//! image of the embeddings.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, Normal};

use super::captions::{captions_to_tsv, CaptionRow};
use super::container::{VectorFile, VectorKind};
use super::io::{sha256_hex, write_atomic};
use super::manifest::{DatasetManifest, SplitLists, SyntheticMetadata, MANIFEST_VERSION};
use crate::embedding::{Embedder, HashBagEmbedder, DEFAULT_HASHBAG_SEED};
use crate::error::{Error, Result};
use crate::nn::{Rng, Tensor2};

pub const SUBJECT_ID: &str = "synth01";
pub const RESPONSES_FILE: &str = "responses.bin";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const CAPTIONS_FILE: &str = "captions.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Fraction of each concept held out for testing.
pub const TEST_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub concepts: usize,
    pub per_concept: usize,
    pub dim: usize,
    pub response_dim: usize,
    pub noise: f64,
    pub embedder_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            concepts: 8,
            per_concept: 50,
            dim: 32,
            response_dim: 64,
            noise: 0.1,
            embedder_seed: DEFAULT_HASHBAG_SEED,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.concepts < 2 {
            return Err(Error::InvalidArgument("need at least 2 concepts".into()));
        }
        if self.per_concept < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 captions per concept to populate both splits".into(),
            ));
        }
        if self.dim == 0 || self.response_dim == 0 {
            return Err(Error::InvalidArgument("dimensions must be ≥ 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise must be finite and ≥ 0, got {}", self.noise)));
        }
        Ok(())
    }

    pub fn test_per_concept(&self) -> usize {
        ((self.per_concept as f64 * TEST_FRACTION).round() as usize).clamp(1, self.per_concept - 1)
    }
}

struct Theme {
    name: String,
    nouns: Vec<String>,
    verbs: Vec<String>,
    places: Vec<String>,
}

const ADJECTIVES: [&str; 8] = ["red", "small", "large", "white", "black", "old", "bright", "brown"];
const PREPOSITIONS: [&str; 4] = ["near", "in", "on", "by"];

/// name, nouns, verbs, places
type ThemeWords = (&'static str, [&'static str; 4], [&'static str; 3], [&'static str; 3]);

const BUILTIN_THEMES: [ThemeWords; 8] = [
    ("animals", ["dog", "cat", "horse", "rabbit"], ["running", "sleeping", "jumping"], ["field", "yard", "barn"]),
    ("vehicles", ["car", "bus", "truck", "train"], ["moving", "parking", "turning"], ["street", "road", "station"]),
    ("food", ["pizza", "sandwich", "cake", "salad"], ["sitting", "cooling", "waiting"], ["plate", "table", "counter"]),
    ("sports", ["player", "skier", "surfer", "batter"], ["swinging", "throwing", "catching"], ["court", "beach", "slope"]),
    ("kitchen", ["oven", "sink", "stove", "fridge"], ["glowing", "humming", "gleaming"], ["kitchen", "wall", "window"]),
    ("birds", ["bird", "pigeon", "seagull", "parrot"], ["flying", "perching", "landing"], ["tree", "sky", "pond"]),
    ("people", ["man", "woman", "child", "girl"], ["walking", "smiling", "talking"], ["park", "crowd", "sidewalk"]),
    ("furniture", ["chair", "couch", "bed", "desk"], ["resting", "leaning", "facing"], ["bedroom", "office", "hallway"]),
];

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "tu", "re", "sa", "no", "vi", "ze", "pa", "qu", "do", "fe", "gi", "bo", "xu",
];

fn pseudo_word(rng: &mut Rng, taken: &mut HashSet<String>, suffix: &str) -> String {
    loop {
        let n = rng.random_range(2..=3);
        let mut w: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        w.push_str(suffix);
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

fn themes(count: usize, rng: &mut Rng) -> Vec<Theme> {
    let mut taken: HashSet<String> = ADJECTIVES
        .iter()
        .chain(PREPOSITIONS.iter())
        .chain(["a", "the"].iter())
        .map(|s| s.to_string())
        .collect();
    let mut out = Vec::with_capacity(count);
    for (name, nouns, verbs, places) in BUILTIN_THEMES.iter().take(count) {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        for w in nouns.iter().chain(verbs.iter()).chain(places.iter()) {
            taken.insert(w.to_string());
        }
        out.push(Theme {
            name: name.to_string(),
            nouns: own(nouns),
            verbs: own(verbs),
            places: own(places),
        });
    }
    for k in out.len()..count {
        out.push(Theme {
            name: format!("concept{k:02}"),
            nouns: (0..4).map(|_| pseudo_word(rng, &mut taken, "")).collect(),
            verbs: (0..3).map(|_| pseudo_word(rng, &mut taken, "ing")).collect(),
            places: (0..3).map(|_| pseudo_word(rng, &mut taken, "")).collect(),
        });
    }
    out
}

fn sentence(theme: &Theme, rng: &mut Rng) -> String {
    let adj = ADJECTIVES.choose(rng).expect("non-empty");
    let prep = PREPOSITIONS.choose(rng).expect("non-empty");
    let noun = theme.nouns.choose(rng).expect("non-empty");
    let verb = theme.verbs.choose(rng).expect("non-empty");
    let place = theme.places.choose(rng).expect("non-empty");
    match rng.random_range(0..3) {
        0 => format!("a {adj} {noun} {verb} {prep} the {place}"),
        1 => format!("the {noun} {verb} {prep} a {adj} {place}"),
        _ => format!("{adj} {noun} {verb} {prep} the {place}"),
    }
}

/// Generated corpus held at full precision.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub captions: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    pub responses: Vec<Vec<f64>>,
    /// F×D mixing matrix.
    pub mixing: Tensor2,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticDataset> {
    spec.validate()?;
    // Independent streams so changing one stage leaves the others intact.
    let stream = |s: u64| {
        let mut r = Rng::seed_from_u64(seed);
        r.set_stream(s);
        r
    };
    let mut grammar_rng = stream(1);
    let mut mixing_rng = stream(2);
    let mut noise_rng = stream(3);
    let mut split_rng = stream(4);

    let themes = themes(spec.concepts, &mut grammar_rng);
    let embedder = HashBagEmbedder::new(spec.dim, spec.embedder_seed)?;

    let n = spec.concepts * spec.per_concept;
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut captions = Vec::with_capacity(n);
    let mut embeddings = Vec::with_capacity(n);
    for theme in &themes {
        let mut seen = HashSet::new();
        let mut attempts = 0usize;
        while seen.len() < spec.per_concept {
            attempts += 1;
            if attempts > 1000 * spec.per_concept {
                return Err(Error::InvalidArgument(format!(
                    "cannot draw {} distinct captions for concept {}",
                    spec.per_concept, theme.name
                )));
            }
            let s = sentence(theme, &mut grammar_rng);
            if seen.insert(s.clone()) {
                ids.push(format!("s{:05}", ids.len()));
                labels.push(theme.name.clone());
                embeddings.push(embedder.embed(&s)?.into_vec());
                captions.push(s);
            }
        }
    }

    // variance 1/D keeps response coordinates on the scale of unit-norm embedding coordinates
    let gauss = Normal::new(0.0, (1.0 / spec.dim as f64).sqrt()).expect("valid normal");
    let mixing_data: Vec<f64> = (0..spec.response_dim * spec.dim)
        .map(|_| gauss.sample(&mut mixing_rng))
        .collect();
    let mixing = Tensor2::from_vec(spec.response_dim, spec.dim, mixing_data)?;
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let responses = embeddings
        .iter()
        .map(|e| {
            let mut r = mixing.matvec(e)?;
            if spec.noise > 0.0 {
                for v in &mut r {
                    *v += spec.noise * noise.sample(&mut noise_rng);
                }
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_test = spec.test_per_concept();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for k in 0..spec.concepts {
        let mut members: Vec<usize> = (k * spec.per_concept..(k + 1) * spec.per_concept).collect();
        members.shuffle(&mut split_rng);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();

    Ok(SyntheticDataset {
        spec: spec.clone(),
        seed,
        ids,
        labels,
        captions,
        embeddings,
        responses,
        mixing,
        train,
        test,
    })
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn response_file(&self) -> Result<VectorFile> {
        let mut f = VectorFile::new(VectorKind::Responses, self.spec.response_dim);
        for (id, r) in self.ids.iter().zip(&self.responses) {
            f.push(id.clone(), r.clone())?;
        }
        Ok(f)
    }

    pub fn embedding_file(&self) -> Result<VectorFile> {
        let mut f = VectorFile::new(VectorKind::Embeddings, self.spec.dim);
        for (id, e) in self.ids.iter().zip(&self.embeddings) {
            f.push(id.clone(), e.clone())?;
        }
        Ok(f)
    }

    pub fn caption_rows(&self) -> Vec<CaptionRow> {
        self.ids
            .iter()
            .zip(&self.captions)
            .map(|(id, c)| CaptionRow::new(id.clone(), SUBJECT_ID, c.clone()))
            .collect()
    }

    /// Writes the three data files and the manifest into `dir`; returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let responses = self.response_file()?.to_bytes()?;
        let embeddings = self.embedding_file()?.to_bytes()?;
        let captions = captions_to_tsv(&self.caption_rows()).into_bytes();

        let mut checksums = BTreeMap::new();
        checksums.insert("responses".to_string(), sha256_hex(&responses));
        checksums.insert("embeddings".to_string(), sha256_hex(&embeddings));
        checksums.insert("captions".to_string(), sha256_hex(&captions));

        write_atomic(&dir.join(RESPONSES_FILE), &responses)?;
        write_atomic(&dir.join(EMBEDDINGS_FILE), &embeddings)?;
        write_atomic(&dir.join(CAPTIONS_FILE), &captions)?;

        let pick = |idx: &[usize]| idx.iter().map(|&i| self.ids[i].clone()).collect();
        let manifest = DatasetManifest {
            format_version: MANIFEST_VERSION,
            responses: RESPONSES_FILE.into(),
            embeddings: EMBEDDINGS_FILE.into(),
            captions: CAPTIONS_FILE.into(),
            checksums,
            split: SplitLists {
                train: pick(&self.train),
                test: pick(&self.test),
            },
            labels: self.ids.iter().cloned().zip(self.labels.iter().cloned()).collect(),
            synthetic: Some(SyntheticMetadata {
                seed: self.seed,
                noise: self.spec.noise,
                concepts: self.spec.concepts,
                per_concept: self.spec.per_concept,
                dim: self.spec.dim,
                response_dim: self.spec.response_dim,
                embedder: "hashbag".into(),
                embedder_seed: self.spec.embedder_seed,
            }),
        };
        let path = dir.join(MANIFEST_FILE);
        manifest.write(&path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            concepts: 3,
            per_concept: 10,
            dim: 8,
            response_dim: 12,
            noise: 0.0,
            embedder_seed: 1,
        }
    }

    #[test]
    fn split_arithmetic() {
        let ds = generate_synthetic(&SyntheticSpec::default(), 7).unwrap();
        assert_eq!(ds.len(), 400);
        assert_eq!(ds.train.len(), 360);
        assert_eq!(ds.test.len(), 40);
        for theme in BUILTIN_THEMES.iter().map(|t| t.0) {
            assert_eq!(ds.test.iter().filter(|&&i| ds.labels[i] == theme).count(), 5);
        }
    }

    #[test]
    fn captions_distinct_within_concept() {
        let ds = generate_synthetic(&small(), 3).unwrap();
        let unique: HashSet<_> = ds.captions.iter().collect();
        assert_eq!(unique.len(), ds.len());
    }

    #[test]
    fn noiseless_responses_are_linear_image() {
        let ds = generate_synthetic(&small(), 3).unwrap();
        for (e, r) in ds.embeddings.iter().zip(&ds.responses) {
            assert_eq!(&ds.mixing.matvec(e).unwrap(), r);
        }
    }

    #[test]
    fn pseudo_word_concepts_beyond_builtin() {
        let spec = SyntheticSpec {
            concepts: 10,
            ..small()
        };
        let ds = generate_synthetic(&spec, 1).unwrap();
        assert!(ds.labels.contains(&"concept09".to_string()));
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic(&SyntheticSpec { concepts: 1, ..small() }, 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { noise: -1.0, ..small() }, 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { per_concept: 5000, ..small() }, 0).is_err());
    }
}
