//! QBHF field files.
//!
//! Little-endian layout:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `QBHF`                              |
//! | 4     | u32 version                               |
//! | 12    | u32 H, u32 W, u32 C                       |
//! | 4     | f32 spacing                               |
//! | …     | H·W·C values, row outer, column, channel  |
//!
//! Version 1 stores values as f32. Version 2 is identical except values are
//! f64, for pipelines that need more than single precision between stages.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{FeatureField, FieldError};

pub const MAGIC: [u8; 4] = *b"QBHF";
pub const VERSION_F32: u32 = 1;
pub const VERSION_F64: u32 = 2;
pub const HEADER_LEN: usize = 24;

/// Refuse headers that would describe more than this many values.
const MAX_VALUES: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"QBHF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported QBHF version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated QBHF data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("QBHF dimensions {height}x{width}x{channels} overflow the supported size")]
    DimensionOverflow {
        height: u32,
        width: u32,
        channels: u32,
    },
    #[error("{0} unexpected bytes after the QBHF payload")]
    TrailingData(usize),
    #[error("value {0} cannot be stored as f32")]
    NotRepresentable(f64),
    #[error("invalid field in QBHF data: {0}")]
    InvalidField(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Encodes as version 1 (f32 payload). Values round to the nearest f32.
pub fn field_to_bytes(field: &FeatureField) -> Result<Vec<u8>, FormatError> {
    let mut out = header(field, VERSION_F32, 4)?;
    for &v in field.values() {
        let single = v as f32;
        if !single.is_finite() {
            return Err(FormatError::NotRepresentable(v));
        }
        out.extend_from_slice(&single.to_le_bytes());
    }
    Ok(out)
}

/// Encodes as version 2 (f64 payload), lossless for every field.
pub fn field_to_bytes_f64(field: &FeatureField) -> Result<Vec<u8>, FormatError> {
    let mut out = header(field, VERSION_F64, 8)?;
    for &v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn header(field: &FeatureField, version: u32, width_bytes: usize) -> Result<Vec<u8>, FormatError> {
    let dims = [field.height(), field.width(), field.channels()];
    let as_u32 = |d: usize| u32::try_from(d).ok();
    let (Some(h), Some(w), Some(c)) = (as_u32(dims[0]), as_u32(dims[1]), as_u32(dims[2])) else {
        return Err(FormatError::DimensionOverflow {
            height: u32::MAX,
            width: u32::MAX,
            channels: u32::MAX,
        });
    };
    let spacing = field.spacing() as f32;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(FormatError::NotRepresentable(field.spacing()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + field.values().len() * width_bytes);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    out.extend_from_slice(&spacing.to_le_bytes());
    Ok(out)
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<FeatureField, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("length checked");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("in header"));
    let version = word(4);
    let value_bytes = match version {
        VERSION_F32 => 4,
        VERSION_F64 => 8,
        v => return Err(FormatError::UnsupportedVersion(v)),
    };
    let (h, w, c) = (word(8), word(12), word(16));
    let spacing = f32::from_le_bytes(bytes[20..24].try_into().expect("in header"));

    let count = (h as u64)
        .checked_mul(w as u64)
        .and_then(|n| n.checked_mul(c as u64))
        .filter(|&n| n <= MAX_VALUES)
        .ok_or(FormatError::DimensionOverflow {
            height: h,
            width: w,
            channels: c,
        })?;
    let count = usize::try_from(count).map_err(|_| FormatError::DimensionOverflow {
        height: h,
        width: w,
        channels: c,
    })?;
    let expected = HEADER_LEN + count * value_bytes;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingData(bytes.len() - expected));
    }

    let payload = &bytes[HEADER_LEN..];
    let values: Vec<f64> = if value_bytes == 4 {
        payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")) as f64)
            .collect()
    } else {
        payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect()
    };
    Ok(FeatureField::new(
        h as usize,
        w as usize,
        c as usize,
        spacing as f64,
        values,
    )?)
}

pub fn write_field<W: Write>(field: &FeatureField, mut out: W) -> Result<(), FormatError> {
    out.write_all(&field_to_bytes(field)?)?;
    Ok(())
}

pub fn write_field_f64<W: Write>(field: &FeatureField, mut out: W) -> Result<(), FormatError> {
    out.write_all(&field_to_bytes_f64(field)?)?;
    Ok(())
}

pub fn read_field<R: Read>(mut input: R) -> Result<FeatureField, FormatError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    field_from_bytes(&bytes)
}

pub fn load(path: impl AsRef<Path>) -> Result<FeatureField, FormatError> {
    field_from_bytes(&fs::read(path)?)
}

pub fn save(field: &FeatureField, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, field_to_bytes(field)?)?;
    Ok(())
}

pub fn save_f64(field: &FeatureField, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, field_to_bytes_f64(field)?)?;
    Ok(())
}
