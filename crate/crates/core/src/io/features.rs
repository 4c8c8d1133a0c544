// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Feature matrices: `"DNCB"`, version, kind `u8`, `d: u32`, `n: u64`,
//! `n×d` f32 row-major, then optionally `"LBLS"` and `n` u32 labels.

use std::fmt;
use std::path::Path;

use super::{atomic_write, put_f32s, put_header, read_file, to_u32, Cursor, FormatError};
use crate::error::Result;
use crate::numerics::Matrix;

const MAGIC: &[u8; 4] = b"DNCB";
const LABELS: &[u8; 4] = b"LBLS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    ImageFeatures = 0,
    TextEmbeddings = 1,
    Activations = 2,
}

impl FeatureKind {
    fn from_u8(v: u8) -> Result<Self, FormatError> {
        match v {
            0 => Ok(FeatureKind::ImageFeatures),
            1 => Ok(FeatureKind::TextEmbeddings),
            2 => Ok(FeatureKind::Activations),
            other => Err(FormatError::BadKind(other)),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::ImageFeatures => "image features",
            FeatureKind::TextEmbeddings => "text embeddings",
            FeatureKind::Activations => "activations",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub kind: FeatureKind,
    pub matrix: Matrix,
    pub labels: Option<Vec<usize>>,
}

impl FeatureFile {
    pub fn new(kind: FeatureKind, matrix: Matrix) -> Self {
        Self {
            kind,
            matrix,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn expect_kind(&self, expected: FeatureKind) -> Result<(), FormatError> {
        if self.kind != expected {
            return Err(FormatError::WrongKind {
                expected,
                found: self.kind,
            });
        }
        Ok(())
    }
}

pub fn encode_features(file: &FeatureFile) -> Result<Vec<u8>, FormatError> {
    let (n, d) = file.matrix.shape();
    let mut out = Vec::with_capacity(21 + 4 * n * d);
    put_header(&mut out, MAGIC);
    out.push(file.kind as u8);
    out.extend_from_slice(&to_u32(d, "feature width")?.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    put_f32s(&mut out, file.matrix.data(), "feature payload")?;
    if let Some(labels) = &file.labels {
        if labels.len() != n {
            return Err(FormatError::Malformed(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        out.extend_from_slice(LABELS);
        for &y in labels {
            out.extend_from_slice(&to_u32(y, "label")?.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureFile, FormatError> {
    let mut c = Cursor::new(bytes);
    c.header(MAGIC)?;
    let kind = FeatureKind::from_u8(c.u8()?)?;
    let d = c.u32()? as usize;
    let n = usize::try_from(c.u64()?)
        .map_err(|_| FormatError::Malformed("row count does not fit in memory".into()))?;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| FormatError::Malformed("n × d overflows".into()))?;
    let data = c.f32s(count, "feature payload")?;
    let matrix = Matrix::new(n, d, data).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let labels = if c.remaining() == 0 {
        None
    } else {
        if c.remaining() < LABELS.len() || &bytes[c.pos()..c.pos() + 4] != LABELS {
            return Err(FormatError::TrailingBytes(c.remaining()));
        }
        c.take(4)?;
        let raw = c.take(
            n.checked_mul(4)
                .ok_or_else(|| FormatError::Malformed("label block overflows".into()))?,
        )?;
        Some(
            raw.chunks_exact(4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("chunk of 4")) as usize)
                .collect(),
        )
    };
    c.finish()?;
    Ok(FeatureFile {
        kind,
        matrix,
        labels,
    })
}

pub fn read_features(path: &Path) -> Result<FeatureFile> {
    decode_features(&read_file(path)?).map_err(|e| e.at(path))
}

pub fn write_features(path: &Path, file: &FeatureFile) -> Result<()> {
    let bytes = encode_features(file).map_err(|e| e.at(path))?;
    atomic_write(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Vec<u8> {
        let mut b = b"DNCB".to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.push(0);
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&1u64.to_le_bytes());
        b.extend_from_slice(&0.5f32.to_le_bytes());
        b
    }

    #[test]
    fn minimal_file() {
        let f = decode_features(&minimal()).unwrap();
        assert_eq!(f.kind, FeatureKind::ImageFeatures);
        assert_eq!(f.matrix, Matrix::from_rows(&[[0.5]]).unwrap());
        assert_eq!(f.labels, None);
        assert_eq!(encode_features(&f).unwrap(), minimal());
    }

    #[test]
    fn labels_block() {
        let mut b = minimal();
        b.extend_from_slice(b"LBLS");
        b.extend_from_slice(&7u32.to_le_bytes());
        let f = decode_features(&b).unwrap();
        assert_eq!(f.labels, Some(vec![7]));
        assert_eq!(encode_features(&f).unwrap(), b);
    }

    #[test]
    fn distinct_error_kinds() {
        let b = minimal();
        let kind = |bytes: &[u8]| decode_features(bytes).unwrap_err().kind();

        assert_eq!(kind(&b[..b.len() - 1]), "truncated");

        let mut magic = b.clone();
        magic[0] = b'X';
        assert_eq!(kind(&magic), "bad_magic");

        let mut version = b.clone();
        version[4] = 2;
        assert_eq!(kind(&version), "version_mismatch");

        let mut bad_kind = b.clone();
        bad_kind[8] = 9;
        assert_eq!(kind(&bad_kind), "bad_kind");

        let mut trailing = b.clone();
        trailing.push(0);
        assert_eq!(kind(&trailing), "trailing_bytes");

        let mut short_labels = b.clone();
        short_labels.extend_from_slice(b"LBLS");
        short_labels.extend_from_slice(&[1, 0]);
        assert_eq!(kind(&short_labels), "truncated");

        let mut extra = b.clone();
        extra.extend_from_slice(b"LBLS");
        extra.extend_from_slice(&[1, 0, 0, 0, 9]);
        assert_eq!(kind(&extra), "trailing_bytes");

        let mut nan = b;
        let at = nan.len() - 4;
        nan[at..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(kind(&nan), "non_finite_value");
    }

    #[test]
    fn huge_header_is_truncation_not_allocation() {
        let mut b = b"DNCB".to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.push(0);
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        b.extend_from_slice(&(u64::MAX / 8).to_le_bytes());
        let err = decode_features(&b).unwrap_err();
        assert!(matches!(err.kind(), "truncated" | "malformed"));
    }

    #[test]
    fn empty_file_allowed() {
        let f = FeatureFile::new(FeatureKind::ImageFeatures, Matrix::zeros(0, 4));
        let back = decode_features(&encode_features(&f).unwrap()).unwrap();
        assert_eq!(back.matrix.shape(), (0, 4));
    }

    #[test]
    fn label_count_must_match_rows() {
        let f =
            FeatureFile::new(FeatureKind::ImageFeatures, Matrix::zeros(2, 1)).with_labels(vec![0]);
        assert!(encode_features(&f).is_err());
    }
}
