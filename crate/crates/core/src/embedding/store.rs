use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use super::{cosine_similarity, EmbeddingVector};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: EmbeddingVector,
    pub label: Option<String>,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, values: Vec<f64>, label: Option<String>) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            vector: EmbeddingVector::new(values)?,
            label,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

/// Records of fixed dimension with unique ids. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: usize,
    records: Vec<EmbeddingRecord>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_records(dim: usize, records: impl IntoIterator<Item = EmbeddingRecord>) -> Result<Self> {
        let mut store = Self::new(dim);
        for r in records {
            store.insert(r)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<()> {
        ensure_len(
            &format!("embedding {:?}", record.id),
            self.dim,
            record.vector.dim(),
        )?;
        if self.index.contains_key(&record.id) {
            return Err(Error::Data(format!("duplicate embedding id {:?}", record.id)));
        }
        self.index.insert(record.id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingRecord> {
        self.records.iter()
    }

    /// Top-`k` records by cosine similarity, descending; ties go to the
    /// lexicographically smaller id.
    pub fn nearest_neighbor(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        if self.records.is_empty() {
            return Err(Error::Empty("nearest-neighbour search over an empty store".into()));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be ≥ 1".into()));
        }
        ensure_len("nearest-neighbour query", self.dim, query.len())?;
        let mut scored = self
            .records
            .iter()
            .map(|r| {
                Ok(Neighbor {
                    id: r.id.clone(),
                    similarity: cosine_similarity(query, r.vector.as_slice())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(rank_order);
        scored.truncate(k);
        Ok(scored)
    }

    /// Nearest-neighbour reverse embedding: the id (a caption) of the closest record.
    pub fn reverse_embed_nn(&self, query: &[f64]) -> Result<String> {
        Ok(self.nearest_neighbor(query, 1)?.remove(0).id)
    }

    /// Parses the embedding TSV: a `#dim=D` header, then
    /// `id<TAB>label<TAB>v1,v2,...,vD` per line. An empty label is `None`.
    pub fn parse_tsv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let dim = loop {
            let (_, line) = lines
                .next()
                .ok_or_else(|| Error::Format("embedding TSV is missing its #dim header".into()))?;
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let value = line
                .trim()
                .strip_prefix("#dim=")
                .ok_or_else(|| Error::Format(format!("expected #dim=D header, found {line:?}")))?;
            break value
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("bad dimension in header {line:?}")))?;
        };
        let mut store = Self::new(dim);
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Format(format!(
                    "line {}: expected 3 tab-separated fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let values = fields[2]
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            if values.len() != dim {
                return Err(Error::dim(format!("embedding TSV line {}", lineno + 1), dim, values.len()));
            }
            let label = (!fields[1].is_empty()).then(|| fields[1].to_string());
            store.insert(EmbeddingRecord::new(fields[0], values, label)?)?;
        }
        Ok(store)
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(std::io::BufReader::new(file))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("#dim={}\n", self.dim);
        for r in &self.records {
            let values: Vec<String> = r.vector.as_slice().iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                r.id,
                r.label.as_deref().unwrap_or(""),
                values.join(",")
            );
        }
        out
    }
}

fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.id.cmp(&b.id))
}
