//! Tokenization, vocabulary construction and caption ↔ index conversion.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const START: usize = 1;
pub const END: usize = 2;
pub const UNK: usize = 3;

pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<start>", "<end>", "<unk>"];

pub const DEFAULT_MIN_FREQ: usize = 2;

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '“' | '”' | '‘' | '’' | '«' | '»' | '–' | '—' | '…' | '¿' | '¡' | '·'
        )
}

/// Lowercases, splits on Unicode whitespace and trims surrounding punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(is_punctuation).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Token ↔ index bijection with the four specials at indices 0–3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_freq: usize,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_freq` times, ordered by descending
    /// frequency and then alphabetically.
    pub fn build<S: AsRef<str>>(corpus: &[S], min_freq: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("vocabulary corpus".into()));
        }
        if min_freq == 0 {
            return Err(Error::InvalidArgument("min_freq must be ≥ 1".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for caption in corpus {
            for t in tokenize(caption.as_ref()) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, n)| *n >= min_freq && !SPECIAL_TOKENS.contains(&t.as_str()))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens, min_freq)
    }

    pub(crate) fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Result<Self> {
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*special) {
                return Err(Error::Format(format!(
                    "vocabulary index {i} must hold {special}"
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Format(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            index,
            min_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// `<start>`, one index per token (unknowns map to `<unk>`), `<end>`.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        std::iter::once(START)
            .chain(tokenize(text).iter().map(|t| self.index_of(t).unwrap_or(UNK)))
            .chain(std::iter::once(END))
            .collect()
    }

    /// Joins tokens with single spaces, skipping `<pad>`/`<start>` and
    /// stopping at the first `<end>`. `<unk>` is rendered literally.
    pub fn decode(&self, indices: &[usize]) -> Result<String> {
        let mut words = Vec::new();
        for &i in indices {
            let token = self.token(i).ok_or_else(|| {
                Error::InvalidArgument(format!("token index {i} out of range for vocabulary of {}", self.len()))
            })?;
            match i {
                END => break,
                PAD | START => continue,
                _ => words.push(token),
            }
        }
        Ok(words.join(" "))
    }

    /// File form: line k+1 holds the token with index k.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        let tokens = match tokens.last() {
            Some(last) if last.is_empty() => tokens[..tokens.len() - 1].to_vec(),
            _ => tokens,
        };
        // frequency threshold is not recorded in the file
        Self::from_tokens(tokens, 1)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// SHA-256 of the file form, used to pair decoder checkpoints with vocabularies.
    pub fn hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.to_file_string().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest[..32]);
        out
    }
}

/// One caption with its encoded index sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub stimulus_id: String,
    pub subject_id: String,
    pub raw: String,
    pub tokens: Vec<usize>,
}

impl CaptionRecord {
    pub fn new(
        vocab: &Vocabulary,
        stimulus_id: impl Into<String>,
        subject_id: impl Into<String>,
        raw: impl Into<String>,
    ) -> Self {
        let raw = raw.into();
        let tokens = vocab.encode(&raw);
        Self {
            stimulus_id: stimulus_id.into(),
            subject_id: subject_id.into(),
            raw,
            tokens,
        }
    }
}

/// Checks `<start>` … `<end>` framing with no interior `<pad>` and every
/// index inside the vocabulary.
pub fn validate_sequence(tokens: &[usize], vocab_len: usize) -> Result<()> {
    if tokens.len() < 2 || tokens[0] != START || *tokens.last().unwrap() != END {
        return Err(Error::InvalidArgument(
            "token sequence must begin with <start> and end with <end>".into(),
        ));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab_len) {
        return Err(Error::InvalidArgument(format!(
            "token index {bad} out of range for vocabulary of {vocab_len}"
        )));
    }
    if tokens[1..tokens.len() - 1].iter().any(|&t| t == PAD || t == START) {
        return Err(Error::InvalidArgument(
            "token sequence holds <pad> or <start> in its interior".into(),
        ));
    }
    Ok(())
}
