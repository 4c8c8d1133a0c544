// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! File formats, configuration and report writers.
//!
//! All binary formats are little-endian and start with a four-byte magic and
//! a `u32` version. Every writer goes through [`atomic_write`], so a failed
//! command never leaves a partial artifact behind.

mod checkpoint;
mod config;
mod features;
mod probe;
mod reports;
mod text;
mod vocab;

use std::io::Write;
use std::path::Path;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{EvalSection, ProbeSection, RunConfig, SaeSection, VocabSection};
pub use features::{
    decode_features, encode_features, read_features, write_features, FeatureFile, FeatureKind,
};
pub use probe::{decode_probe, encode_probe, load_probe, save_probe};
pub use reports::{
    cluster_csv, explanations_csv, global_explanation_csv, names_csv, sae_history_csv,
};
pub use text::{
    parse_index_list, parse_intervention, read_index_list, read_lines, InterventionFile,
};
pub use vocab::{
    decode_vocab, encode_vocab, read_vocab, write_vocab, VocabFile, UNIT_NORM_TOLERANCE,
};

use crate::error::{Error, Result};

/// Format version written and accepted by every binary format.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("truncated: {needed} bytes needed at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after the declared blocks")]
    TrailingBytes(usize),
    #[error("unknown feature kind {0}")]
    BadKind(u8),
    #[error("expected {expected:?} data, found {found:?}")]
    WrongKind {
        expected: FeatureKind,
        found: FeatureKind,
    },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("entry {0} is not valid UTF-8")]
    Utf8(usize),
    #[error("embedding {index} has norm {norm}, expected 1 within {UNIT_NORM_TOLERANCE}")]
    NotUnitNorm { index: usize, norm: f64 },
    #[error("duplicate word {0:?}")]
    DuplicateWord(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    Malformed(String),
}

impl FormatError {
    pub fn kind(&self) -> &'static str {
        match self {
            FormatError::BadMagic { .. } => "bad_magic",
            FormatError::VersionMismatch { .. } => "version_mismatch",
            FormatError::Truncated { .. } => "truncated",
            FormatError::TrailingBytes(_) => "trailing_bytes",
            FormatError::BadKind(_) => "bad_kind",
            FormatError::WrongKind { .. } => "wrong_kind",
            FormatError::Checksum { .. } => "checksum_mismatch",
            FormatError::Utf8(_) => "invalid_utf8",
            FormatError::NotUnitNorm { .. } => "not_unit_norm",
            FormatError::DuplicateWord(_) => "duplicate_word",
            FormatError::NonFinite(_) => "non_finite_value",
            FormatError::Malformed(_) => "malformed",
        }
    }

    pub(crate) fn at(self, path: &Path) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            source: self,
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Write `bytes` to a temporary file next to `path` and rename it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Sequential little-endian reader over a byte slice.
pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if n > self.remaining() {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// `count` f32 values widened to f64. The full byte range is checked
    /// before anything is decoded.
    pub(crate) fn f32s(
        &mut self,
        count: usize,
        what: &'static str,
    ) -> Result<Vec<f64>, FormatError> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| FormatError::Malformed(format!("{what}: size overflows")))?;
        let raw = self.take(bytes)?;
        let out: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(FormatError::NonFinite(what));
        }
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let found = self.array::<4>()?;
        if &found != expected {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(&found).into_owned(),
            });
        }
        Ok(())
    }

    pub(crate) fn header(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        self.magic(magic)?;
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::VersionMismatch {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

pub(crate) fn put_header(out: &mut Vec<u8>, magic: &[u8; 4]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
}

/// Append `values` as f32, failing if any value overflows f32.
pub(crate) fn put_f32s(
    out: &mut Vec<u8>,
    values: &[f64],
    what: &'static str,
) -> Result<(), FormatError> {
    out.reserve(values.len() * 4);
    for &v in values {
        let x = v as f32;
        if !x.is_finite() {
            return Err(FormatError::NonFinite(what));
        }
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

pub(crate) fn to_u32(value: usize, what: &str) -> Result<u32, FormatError> {
    u32::try_from(value)
        .map_err(|_| FormatError::Malformed(format!("{what} {value} does not fit in u32")))
}
