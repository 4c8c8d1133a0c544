// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! SAE checkpoints: `"DNCK"`, version, `d: u32`, `h: u32`, `W_E` then `W_D`
//! as f32 row-major, then the CRC32 of the weight bytes.

use std::path::Path;

use super::{atomic_write, put_f32s, put_header, read_file, to_u32, Cursor, FormatError};
use crate::error::Result;
use crate::numerics::Matrix;
use crate::sae::SaeModel;

const MAGIC: &[u8; 4] = b"DNCK";
const HEADER: usize = 16;

/// Weights are stored at f32, so `decode(encode(m)) == m.round_to_f32()`.
pub fn encode_checkpoint(model: &SaeModel) -> Result<Vec<u8>, FormatError> {
    let (d, h) = (model.d(), model.h());
    let mut out = Vec::with_capacity(HEADER + 8 * d * h + 4);
    put_header(&mut out, MAGIC);
    out.extend_from_slice(&to_u32(d, "d")?.to_le_bytes());
    out.extend_from_slice(&to_u32(h, "h")?.to_le_bytes());
    put_f32s(&mut out, model.encoder().data(), "encoder")?;
    put_f32s(&mut out, model.decoder().data(), "decoder")?;
    let crc = crc32fast::hash(&out[HEADER..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SaeModel, FormatError> {
    let mut c = Cursor::new(bytes);
    c.header(MAGIC)?;
    let d = c.u32()? as usize;
    let h = c.u32()? as usize;
    let count = d
        .checked_mul(h)
        .ok_or_else(|| FormatError::Malformed("d × h overflows".into()))?;
    let start = c.pos();
    let encoder = c.f32s(count, "encoder")?;
    let decoder = c.f32s(count, "decoder")?;
    let computed = crc32fast::hash(&bytes[start..c.pos()]);
    let stored = c.u32()?;
    c.finish()?;
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }
    let malformed = |e: crate::Error| FormatError::Malformed(e.to_string());
    SaeModel::new(
        Matrix::new(d, h, encoder).map_err(malformed)?,
        Matrix::new(h, d, decoder).map_err(malformed)?,
    )
    .map_err(malformed)
}

pub fn save_checkpoint(path: &Path, model: &SaeModel) -> Result<()> {
    let bytes = encode_checkpoint(model).map_err(|e| e.at(path))?;
    atomic_write(path, &bytes)
}

pub fn load_checkpoint(path: &Path) -> Result<SaeModel> {
    decode_checkpoint(&read_file(path)?).map_err(|e| e.at(path))
}
