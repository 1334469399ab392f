//! Binary vector container.
//!
//! ```text
//! magic    4 bytes   "NRSP" (responses) | "EMBD" (embeddings)
//! version  u32 LE
//! dim      u32 LE
//! count    u64 LE
//! count × { id_len u32 LE, id UTF-8, dim × f32 LE }
//! ```
//!
//! Values are stored at 32-bit precision and widened to `f64` on read.

use std::path::Path;

use super::io::{read_bytes, write_atomic, Reader};
use crate::error::{ensure_len, Error, Result};

pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    Responses,
    Embeddings,
}

impl VectorKind {
    pub fn magic(self) -> [u8; 4] {
        match self {
            VectorKind::Responses => *b"NRSP",
            VectorKind::Embeddings => *b"EMBD",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub kind: VectorKind,
    pub dim: usize,
    pub records: Vec<(String, Vec<f64>)>,
}

impl VectorFile {
    pub fn new(kind: VectorKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        ensure_len("vector record", self.dim, values.len())?;
        self.records.push((id.into(), values));
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = u32::try_from(self.dim)
            .map_err(|_| Error::InvalidArgument("vector dimension exceeds u32".into()))?;
        let mut out = Vec::with_capacity(20 + self.records.len() * (8 + 4 * self.dim));
        out.extend_from_slice(&self.kind.magic());
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for (id, values) in &self.records {
            ensure_len("vector record", self.dim, values.len())?;
            let id_len = u32::try_from(id.len())
                .map_err(|_| Error::InvalidArgument("record id too long".into()))?;
            out.extend_from_slice(&id_len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for &v in values {
                let narrowed = v as f32;
                if !narrowed.is_finite() {
                    return Err(Error::NonFinite(format!("vector record {id:?}")));
                }
                out.extend_from_slice(&narrowed.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], expected: VectorKind) -> Result<Self> {
        let mut r = Reader::new(bytes, "vector container");
        let magic: [u8; 4] = r.array()?;
        if magic != expected.magic() {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(&expected.magic())
            )));
        }
        let version = r.u32()?;
        if version != CONTAINER_VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {version} (this build reads {CONTAINER_VERSION})"
            )));
        }
        let dim = r.u32()? as usize;
        let count = r.u64()?;
        let mut file = VectorFile::new(expected, dim);
        for _ in 0..count {
            let id_len = r.u32()? as usize;
            let id = r.utf8(id_len)?;
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                let v = r.f32()?;
                if !v.is_finite() {
                    return Err(Error::Format(format!("non-finite value in record {id:?}")));
                }
                values.push(f64::from(v));
            }
            file.records.push((id, values));
        }
        r.finish()?;
        Ok(file)
    }

    pub fn read(path: &Path, expected: VectorKind) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?, expected)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut f = VectorFile::new(VectorKind::Responses, 2);
        f.push("ab", vec![1.0, -2.5]).unwrap();
        let bytes = f.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"NRSP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 2);
        assert_eq!(&bytes[24..26], b"ab");
        assert_eq!(f32::from_le_bytes(bytes[26..30].try_into().unwrap()), 1.0);
        assert_eq!(bytes.len(), 34);
    }

    #[test]
    fn rejects_corruption() {
        let mut f = VectorFile::new(VectorKind::Embeddings, 3);
        f.push("x", vec![0.5, 0.25, 0.125]).unwrap();
        let bytes = f.to_bytes().unwrap();
        assert!(VectorFile::from_bytes(&bytes[..bytes.len() - 1], VectorKind::Embeddings).is_err());
        assert!(VectorFile::from_bytes(&bytes, VectorKind::Responses).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(VectorFile::from_bytes(&extra, VectorKind::Embeddings).is_err());
        let mut versioned = bytes;
        versioned[4] = 9;
        assert!(matches!(
            VectorFile::from_bytes(&versioned, VectorKind::Embeddings),
            Err(Error::Format(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_f32_representable(
            rows in proptest::collection::vec(
                ("[a-z0-9_]{1,8}", proptest::collection::vec(-1e3f32..1e3, 4)),
                0..10,
            )
        ) {
            let mut f = VectorFile::new(VectorKind::Embeddings, 4);
            for (id, v) in &rows {
                f.push(id.clone(), v.iter().map(|&x| f64::from(x)).collect()).unwrap();
            }
            let bytes = f.to_bytes().unwrap();
            let back = VectorFile::from_bytes(&bytes, VectorKind::Embeddings).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }
}
