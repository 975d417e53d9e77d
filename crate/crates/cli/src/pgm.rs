//! Binary graymap (P5) heatmaps with a min/max sidecar.

use std::path::{Path, PathBuf};

use crate::error::CliError;

/// How values map onto 0..=255.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Fixed range, values clamped into it.
    Fixed(f64, f64),
    /// The data's own min..max; a constant map becomes mid-gray.
    MinMax,
}

pub fn quantize(values: &[f64], scale: Scale) -> Vec<u8> {
    let (lo, hi) = match scale {
        Scale::Fixed(lo, hi) => (lo, hi),
        Scale::MinMax => min_max(values),
    };
    values
        .iter()
        .map(|&v| {
            if hi > lo {
                (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                128
            }
        })
        .collect()
}

pub fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn encode(pixels: &[u8], width: usize, height: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses a P5 file written by [`encode`]: `(width, height, pixels)`.
#[cfg(test)]
pub fn decode(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?.to_string());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    let data = bytes.get(pos + 1..)?;
    (data.len() == w * h).then(|| (w, h, data.to_vec()))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".minmax");
    PathBuf::from(s)
}

/// Writes the heatmap and `<path>.minmax` holding the raw value range.
pub fn write_heatmap(path: &Path, values: &[f64], width: usize, height: usize, scale: Scale) -> Result<(), CliError> {
    let bytes = encode(&quantize(values, scale), width, height);
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let (lo, hi) = min_max(values);
    let side = sidecar_path(path);
    std::fs::write(&side, format!("min {lo:e}\nmax {hi:e}\n")).map_err(|e| CliError::data(format!("{}: {e}", side.display())))
}
