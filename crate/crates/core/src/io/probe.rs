// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Probes: `"DNCP"`, version, `h: u32`, `K: u32`, `λ₂: f64`, `K` class
//! names (`u16` length + UTF-8), `ω` as f32 row-major, then the CRC32 of
//! everything after the version.

use std::path::Path;

use super::{atomic_write, put_f32s, put_header, read_file, to_u32, Cursor, FormatError};
use crate::cbm::CbmProbe;
use crate::error::Result;
use crate::numerics::Matrix;

const MAGIC: &[u8; 4] = b"DNCP";
const BODY: usize = 8;

pub fn encode_probe(probe: &CbmProbe) -> Result<Vec<u8>, FormatError> {
    let (h, k) = probe.weights().shape();
    let mut out = Vec::new();
    put_header(&mut out, MAGIC);
    out.extend_from_slice(&to_u32(h, "h")?.to_le_bytes());
    out.extend_from_slice(&to_u32(k, "class count")?.to_le_bytes());
    out.extend_from_slice(&probe.lambda2().to_le_bytes());
    for name in probe.class_names() {
        let len = u16::try_from(name.len())
            .map_err(|_| FormatError::Malformed(format!("class name of {} bytes", name.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    put_f32s(&mut out, probe.weights().data(), "probe weights")?;
    let crc = crc32fast::hash(&out[BODY..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_probe(bytes: &[u8]) -> Result<CbmProbe, FormatError> {
    let mut c = Cursor::new(bytes);
    c.header(MAGIC)?;
    let h = c.u32()? as usize;
    let k = c.u32()? as usize;
    let lambda2 = c.f64()?;
    let mut names = Vec::new();
    for i in 0..k {
        let len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(len)?).map_err(|_| FormatError::Utf8(i))?;
        names.push(name.to_string());
    }
    let count = h
        .checked_mul(k)
        .ok_or_else(|| FormatError::Malformed("h × K overflows".into()))?;
    let weights = c.f32s(count, "probe weights")?;
    let computed = crc32fast::hash(&bytes[BODY..c.pos()]);
    let stored = c.u32()?;
    c.finish()?;
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }
    let malformed = |e: crate::Error| FormatError::Malformed(e.to_string());
    CbmProbe::new(
        Matrix::new(h, k, weights).map_err(malformed)?,
        names,
        lambda2,
    )
    .map_err(malformed)
}

pub fn save_probe(path: &Path, probe: &CbmProbe) -> Result<()> {
    let bytes = encode_probe(probe).map_err(|e| e.at(path))?;
    atomic_write(path, &bytes)
}

pub fn load_probe(path: &Path) -> Result<CbmProbe> {
    decode_probe(&read_file(path)?).map_err(|e| e.at(path))
}
