//! Caption TSV: `stimulus_id<TAB>subject_id<TAB>caption`, one row per
//! caption. A stimulus may have several rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRow {
    pub stimulus_id: String,
    pub subject_id: String,
    pub caption: String,
}

impl CaptionRow {
    pub fn new(stimulus_id: impl Into<String>, subject_id: impl Into<String>, caption: impl Into<String>) -> Self {
        Self {
            stimulus_id: stimulus_id.into(),
            subject_id: subject_id.into(),
            caption: caption.into(),
        }
    }
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

pub fn captions_to_tsv(rows: &[CaptionRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            clean(&r.stimulus_id),
            clean(&r.subject_id),
            clean(&r.caption)
        );
    }
    out
}

pub fn parse_captions(text: &str) -> Result<Vec<CaptionRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let mut parts = line.splitn(3, '\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(subj), Some(c)) if !s.is_empty() => Ok(CaptionRow::new(s, subj, c)),
                _ => Err(Error::Format(format!(
                    "caption TSV line {}: expected stimulus_id<TAB>subject_id<TAB>caption",
                    i + 1
                ))),
            }
        })
        .collect()
}

pub fn read_captions(path: &Path) -> Result<Vec<CaptionRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_captions(&text)
}
