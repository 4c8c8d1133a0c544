// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Vocabularies: `"DNCV"`, version, `count: u32`, `d: u32`, then per word a
//! `u16` byte length, the UTF-8 bytes and `d` f32 embedding values.

use std::collections::HashSet;
use std::path::Path;

use super::{atomic_write, put_f32s, put_header, read_file, to_u32, Cursor, FormatError};
use crate::error::Result;
use crate::naming::Vocabulary;
use crate::numerics::{norm, Matrix};

const MAGIC: &[u8; 4] = b"DNCV";

/// Largest accepted deviation of an embedding norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

/// Vocabulary exactly as stored, widened from f32.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabFile {
    pub words: Vec<String>,
    pub embeddings: Matrix,
}

impl VocabFile {
    pub fn into_vocabulary(self) -> Result<Vocabulary> {
        Vocabulary::new(self.words, self.embeddings)
    }
}

impl From<&Vocabulary> for VocabFile {
    fn from(v: &Vocabulary) -> Self {
        Self {
            words: v.words().to_vec(),
            embeddings: v.embeddings().clone(),
        }
    }
}

fn validate(words: &[String], embeddings: &Matrix) -> Result<(), FormatError> {
    let mut seen = HashSet::with_capacity(words.len());
    for w in words {
        if !seen.insert(w.as_str()) {
            return Err(FormatError::DuplicateWord(w.clone()));
        }
    }
    for (index, row) in embeddings.row_iter().enumerate() {
        let len = norm(row);
        if (len - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(FormatError::NotUnitNorm { index, norm: len });
        }
    }
    Ok(())
}

pub fn encode_vocab(file: &VocabFile) -> Result<Vec<u8>, FormatError> {
    let (count, d) = file.embeddings.shape();
    if file.words.len() != count {
        return Err(FormatError::Malformed(format!(
            "{} words for {count} embeddings",
            file.words.len()
        )));
    }
    validate(&file.words, &file.embeddings)?;
    let mut out = Vec::new();
    put_header(&mut out, MAGIC);
    out.extend_from_slice(&to_u32(count, "word count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(d, "embedding width")?.to_le_bytes());
    for (w, row) in file.words.iter().zip(file.embeddings.row_iter()) {
        let len = u16::try_from(w.len()).map_err(|_| {
            FormatError::Malformed(format!("word of {} bytes is too long", w.len()))
        })?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(w.as_bytes());
        put_f32s(&mut out, row, "embedding")?;
    }
    Ok(out)
}

pub fn decode_vocab(bytes: &[u8]) -> Result<VocabFile, FormatError> {
    let mut c = Cursor::new(bytes);
    c.header(MAGIC)?;
    let count = c.u32()? as usize;
    let d = c.u32()? as usize;
    let mut words = Vec::new();
    let mut data = Vec::new();
    for i in 0..count {
        let len = c.u16()? as usize;
        let word = std::str::from_utf8(c.take(len)?).map_err(|_| FormatError::Utf8(i))?;
        words.push(word.to_string());
        data.extend(c.f32s(d, "embedding")?);
    }
    c.finish()?;
    let embeddings =
        Matrix::new(count, d, data).map_err(|e| FormatError::Malformed(e.to_string()))?;
    validate(&words, &embeddings)?;
    Ok(VocabFile { words, embeddings })
}

pub fn read_vocab(path: &Path) -> Result<VocabFile> {
    decode_vocab(&read_file(path)?).map_err(|e| e.at(path))
}

pub fn write_vocab(path: &Path, file: &VocabFile) -> Result<()> {
    let bytes = encode_vocab(file).map_err(|e| e.at(path))?;
    atomic_write(path, &bytes)
}
