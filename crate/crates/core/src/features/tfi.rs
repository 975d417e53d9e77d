use super::stft::Spectrogram;
use crate::error::{Error, Result};

/// Floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-6;

/// Time-frequency image, `height x width x channels` row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TfiTensor {
    pub values: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Set when the spectrogram was constant and normalisation fell back to 0.5.
    pub degenerate: bool,
}

impl TfiTensor {
    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }
}

/// Three-anchor linear colormap (dark blue, teal, yellow).
const COLORMAP: [[f64; 3]; 3] = [[0.15, 0.10, 0.55], [0.10, 0.65, 0.60], [0.98, 0.92, 0.15]];

fn colormap(v: f64) -> [f64; 3] {
    let (a, b, t) = if v <= 0.5 {
        (COLORMAP[0], COLORMAP[1], v * 2.0)
    } else {
        (COLORMAP[1], COLORMAP[2], (v - 0.5) * 2.0)
    };
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Interpolation weights for resampling `n_in` samples onto `n_out`.
///
/// Triangle (bilinear) kernel whose support widens with the shrink factor, so
/// downscaling averages every input sample instead of skipping rows.
fn resample_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    let support = scale.max(1.0);
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale - 0.5;
            let lo = (center - support).floor().max(0.0) as usize;
            let hi = ((center + support).ceil() as usize).min(n_in - 1);
            let mut taps: Vec<(usize, f64)> = (lo..=hi)
                .map(|j| (j, (1.0 - (j as f64 - center).abs() / support).max(0.0)))
                .filter(|(_, w)| *w > 0.0)
                .collect();
            if taps.is_empty() {
                let nearest = center.round().clamp(0.0, (n_in - 1) as f64) as usize;
                taps.push((nearest, 1.0));
            }
            let total: f64 = taps.iter().map(|(_, w)| w).sum();
            taps.iter_mut().for_each(|(_, w)| *w /= total);
            taps
        })
        .collect()
}

/// Separable bilinear resize of a `rows x cols` grid.
pub fn resize_bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    let wc = resample_weights(cols, out_cols);
    let mut tmp = vec![0.0; rows * out_cols];
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        for (c, taps) in wc.iter().enumerate() {
            tmp[r * out_cols + c] = taps.iter().map(|(j, w)| row[*j] * w).sum();
        }
    }
    let wr = resample_weights(rows, out_rows);
    let mut out = vec![0.0; out_rows * out_cols];
    for (r, taps) in wr.iter().enumerate() {
        for &(j, w) in taps {
            let src_row = &tmp[j * out_cols..(j + 1) * out_cols];
            for (o, s) in out[r * out_cols..(r + 1) * out_cols].iter_mut().zip(src_row) {
                *o += w * s;
            }
        }
    }
    out
}

/// Log-compressed, min-max normalised and resized spectrogram image.
///
/// Rows of the image are time frames, columns are frequency bins. With
/// `channels == 3` the grey level goes through a fixed colormap; any other
/// channel count replicates the grey level.
pub fn to_tfi(spec: &Spectrogram, height: usize, width: usize, channels: usize) -> Result<TfiTensor> {
    if spec.values.is_empty() || spec.frames == 0 || spec.bins == 0 {
        return Err(Error::param("empty spectrogram"));
    }
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::param("TFI dimensions must be positive"));
    }
    let logs: Vec<f64> = spec.values.iter().map(|v| v.max(LOG_FLOOR).ln()).collect();
    let (min, max) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let range = max - min;
    let degenerate = !(range > 1e-12 * max.abs().max(1.0));
    let norm: Vec<f64> = if degenerate {
        vec![0.5; logs.len()]
    } else {
        logs.iter().map(|v| (v - min) / range).collect()
    };
    let gray = if degenerate {
        vec![0.5; height * width]
    } else {
        resize_bilinear(&norm, spec.frames, spec.bins, height, width)
    };
    let mut values = Vec::with_capacity(height * width * channels);
    for g in gray {
        let g = g.clamp(0.0, 1.0);
        if channels == 3 {
            values.extend(colormap(g));
        } else {
            values.extend(std::iter::repeat_n(g, channels));
        }
    }
    Ok(TfiTensor {
        values,
        height,
        width,
        channels,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(values: Vec<f64>, frames: usize, bins: usize) -> Spectrogram {
        Spectrogram { values, frames, bins, window_len: 2 * bins.saturating_sub(1).max(1), hop: 1 }
    }

    #[test]
    fn log_normalise_hand_case() {
        let e = std::f64::consts::E;
        let s = spec(vec![1.0, e, e * e, e * e * e], 2, 2);
        let t = to_tfi(&s, 2, 2, 1).unwrap();
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in t.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(!t.degenerate);
    }

    #[test]
    fn constant_input_falls_back() {
        let t = to_tfi(&spec(vec![3.0; 40], 5, 8), 4, 4, 1).unwrap();
        assert!(t.degenerate);
        assert!(t.values.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn extremes_map_to_unit_interval() {
        let vals: Vec<f64> = (0..64).map(|i| 0.5 + i as f64).collect();
        let t = to_tfi(&spec(vals, 8, 8), 8, 8, 1).unwrap();
        let max = t.values.iter().cloned().fold(f64::MIN, f64::max);
        let min = t.values.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - 1.0).abs() < 1e-12 && min.abs() < 1e-12);
    }

    #[test]
    fn gain_invariance() {
        let vals: Vec<f64> = (0..30 * 17).map(|i| 1.0 + ((i * 37) % 101) as f64).collect();
        let a = to_tfi(&spec(vals.clone(), 30, 17), 8, 6, 1).unwrap();
        let b = to_tfi(&spec(vals.iter().map(|v| v * 42.5).collect(), 30, 17), 8, 6, 1).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn resize_identity_and_mean_preservation() {
        let src: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(resize_bilinear(&src, 3, 4, 3, 4), src);
        // shrinking a linear ramp by an integer factor keeps it linear and centred
        let ramp: Vec<f64> = (0..64).map(|i| (i % 8) as f64).collect();
        let out = resize_bilinear(&ramp, 8, 8, 4, 4);
        assert!((out[0] - 0.5).abs() < 0.3);
        let mean_in: f64 = ramp.iter().sum::<f64>() / 64.0;
        let mean_out: f64 = out.iter().sum::<f64>() / 16.0;
        assert!((mean_in - mean_out).abs() < 1e-9);
    }

    #[test]
    fn channel_modes() {
        let vals: Vec<f64> = (1..=16).map(|i| i as f64).collect();
        let g = to_tfi(&spec(vals.clone(), 4, 4), 4, 4, 1).unwrap();
        let c = to_tfi(&spec(vals, 4, 4), 4, 4, 3).unwrap();
        assert_eq!(c.values.len(), 48);
        assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(g.shape(), [4, 4, 1]);
        assert!(to_tfi(&spec(vec![], 0, 0), 4, 4, 1).is_err());
    }
}
