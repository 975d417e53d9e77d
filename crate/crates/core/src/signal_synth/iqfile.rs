//! `IQR1` record files and the corpus manifest.
//!
//! Layout (little-endian): 32-byte header `{magic "IQR1", u32 sample_rate,
//! u32 class_id, f32 snr_db, u32 length, 12 reserved bytes}` followed by
//! `length` interleaved `(I, Q)` f32 pairs.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::synth::{IqRecord, RecordMeta};
use crate::error::{Error, Result};

pub const IQ_MAGIC: &[u8; 4] = b"IQR1";
pub const IQ_HEADER_LEN: usize = 32;

pub fn encode_iq(rec: &IqRecord) -> Vec<u8> {
    let mut buf = Vec::with_capacity(IQ_HEADER_LEN + rec.samples.len() * 8);
    buf.extend_from_slice(IQ_MAGIC);
    buf.extend_from_slice(&(rec.sample_rate.round() as u32).to_le_bytes());
    buf.extend_from_slice(&rec.class_id.to_le_bytes());
    buf.extend_from_slice(&(rec.snr_db as f32).to_le_bytes());
    buf.extend_from_slice(&(rec.samples.len() as u32).to_le_bytes());
    buf.extend_from_slice(&[0u8; 12]);
    for s in &rec.samples {
        buf.extend_from_slice(&(s.re as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    buf
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

fn le_f32(b: &[u8]) -> f32 {
    f32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Decodes a record; distance/LoS tags are not stored in the file and come
/// back as defaults.
pub fn decode_iq(bytes: &[u8]) -> Result<IqRecord> {
    if bytes.len() < IQ_HEADER_LEN {
        return Err(Error::format("IQ file shorter than its header"));
    }
    if &bytes[..4] != IQ_MAGIC {
        return Err(Error::format("bad IQ magic"));
    }
    let sample_rate = le_u32(&bytes[4..8]) as f64;
    let class_id = le_u32(&bytes[8..12]);
    let snr_db = le_f32(&bytes[12..16]) as f64;
    let len = le_u32(&bytes[16..20]) as usize;
    let payload = &bytes[IQ_HEADER_LEN..];
    if payload.len() != len * 8 {
        return Err(Error::format(format!(
            "IQ payload holds {} bytes, header declares {len} samples",
            payload.len()
        )));
    }
    let samples = payload
        .chunks_exact(8)
        .map(|c| Complex64::new(le_f32(&c[..4]) as f64, le_f32(&c[4..]) as f64))
        .collect();
    let rec = IqRecord {
        samples,
        sample_rate,
        class_id,
        snr_db,
        meta: RecordMeta::default(),
    };
    rec.validate().map_err(|e| Error::format(e.to_string()))?;
    Ok(rec)
}

pub fn write_iq(path: &Path, rec: &IqRecord) -> Result<()> {
    fs::write(path, encode_iq(rec)).map_err(|e| Error::io(path, e))
}

pub fn read_iq(path: &Path) -> Result<IqRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_iq(&bytes)
}

/// One manifest line: `path,class_id,snr_db,distance_tag,los_tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class_id: u32,
    pub snr_db: f64,
    pub meta: RecordMeta,
}

impl ManifestEntry {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.path.display(),
            self.class_id,
            self.snr_db,
            self.meta.distance,
            self.meta.los
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::format(format!("manifest line needs 5 fields: '{line}'")));
        }
        let class_id = fields[1]
            .parse()
            .map_err(|_| Error::format(format!("bad class id '{}'", fields[1])))?;
        let snr_db = fields[2]
            .parse()
            .map_err(|_| Error::format(format!("bad snr '{}'", fields[2])))?;
        Ok(Self {
            path: PathBuf::from(fields[0]),
            class_id,
            snr_db,
            meta: RecordMeta {
                distance: fields[3].parse()?,
                los: fields[4].parse()?,
            },
        })
    }
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for e in entries {
        writeln!(f, "{}", e.to_line()).map_err(|err| Error::io(path, err))?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(ManifestEntry::parse_line(&line)?);
    }
    Ok(out)
}
