//! `TNS1` tensor container.
//!
//! Layout (little-endian): magic `"TNS1"`, `u8 rank`, `rank x u32` dims,
//! `u8 dtype`, then the row-major payload. Feature files use `f32`;
//! checkpoints use `f64` so a reloaded model is bit-identical.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TNS_MAGIC: &[u8; 4] = b"TNS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlob {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorBlob {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::param(format!("dims {dims:?} do not match {} values", data.len())));
        }
        Ok(Self { dims, data })
    }
}

pub fn encode_tns(blob: &TensorBlob, dtype: DType) -> Result<Vec<u8>> {
    if blob.dims.len() > u8::MAX as usize {
        return Err(Error::param("tensor rank exceeds 255"));
    }
    let mut buf = Vec::with_capacity(6 + 4 * blob.dims.len() + dtype.width() * blob.data.len());
    buf.extend_from_slice(TNS_MAGIC);
    buf.push(blob.dims.len() as u8);
    for d in &blob.dims {
        let d = u32::try_from(*d).map_err(|_| Error::param("dimension exceeds u32"))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    buf.push(dtype as u8);
    match dtype {
        DType::F32 => blob.data.iter().for_each(|v| buf.extend_from_slice(&(*v as f32).to_le_bytes())),
        DType::F64 => blob.data.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(buf)
}

/// Decodes one container from the front of `bytes`, returning it with the
/// number of bytes consumed.
pub fn decode_tns(bytes: &[u8]) -> Result<(TensorBlob, usize)> {
    let short = || Error::format("truncated TNS1 container");
    if bytes.len() < 6 {
        return Err(short());
    }
    if &bytes[..4] != TNS_MAGIC {
        return Err(Error::format("bad TNS1 magic"));
    }
    let rank = bytes[4] as usize;
    let mut pos = 5;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let b = bytes.get(pos..pos + 4).ok_or_else(short)?;
        dims.push(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize);
        pos += 4;
    }
    let dtype = match bytes.get(pos).ok_or_else(short)? {
        0 => DType::F32,
        1 => DType::F64,
        other => return Err(Error::format(format!("unknown dtype code {other}"))),
    };
    pos += 1;
    let count: usize = dims.iter().product();
    let payload = bytes.get(pos..pos + count * dtype.width()).ok_or_else(short)?;
    let data = match dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        DType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    Ok((TensorBlob { dims, data }, pos + payload.len()))
}

pub fn write_tns(path: &Path, blob: &TensorBlob, dtype: DType) -> Result<()> {
    fs::write(path, encode_tns(blob, dtype)?).map_err(|e| Error::io(path, e))
}

pub fn read_tns(path: &Path) -> Result<TensorBlob> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (blob, used) = decode_tns(&bytes)?;
    if used != bytes.len() {
        return Err(Error::format(format!("{} trailing bytes after tensor", bytes.len() - used)));
    }
    Ok(blob)
}
