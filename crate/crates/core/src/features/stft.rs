use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::fft_in_place;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|u| 0.5 - 0.5 * (2.0 * PI * u as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    /// Window length `U`, also the FFT size.
    pub window_len: usize,
    pub hop: usize,
    pub window: Window,
    /// Keep all `U` bins (ordered from `-U/2` to `U/2 - 1`) instead of the
    /// one-sided `U/2 + 1`.
    pub two_sided: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 256,
            window: Window::Hann,
            two_sided: false,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.window_len.is_power_of_two() || self.window_len < 2 {
            return Err(Error::param(format!("STFT window length {} is not a power of two", self.window_len)));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::param(format!("STFT hop {} outside (0, U]", self.hop)));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        if self.two_sided {
            self.window_len
        } else {
            self.window_len / 2 + 1
        }
    }

    pub fn frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }
}

/// STFT magnitudes, `frames x bins`, row-major (one row per time frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
    pub window_len: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn at(&self, t: usize, f: usize) -> f64 {
        self.values[t * self.bins + f]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.bins..(t + 1) * self.bins]
    }
}

/// Windowed FFT magnitudes of `x` with frames starting every `hop` samples.
pub fn stft(x: &[Complex64], cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let u = cfg.window_len;
    if x.len() < u {
        return Err(Error::param(format!("input of {} samples shorter than window {u}", x.len())));
    }
    let frames = cfg.frames(x.len());
    let bins = cfg.bins();
    let win = cfg.window.coefficients(u);
    let mut values = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); u];
    for t in 0..frames {
        let start = t * cfg.hop;
        for ((b, s), w) in buf.iter_mut().zip(&x[start..start + u]).zip(&win) {
            *b = s * w;
        }
        fft_in_place(&mut buf, false);
        if cfg.two_sided {
            values.extend(buf[u / 2..].iter().chain(&buf[..u / 2]).map(|c| c.norm()));
        } else {
            values.extend(buf[..bins].iter().map(|c| c.norm()));
        }
    }
    Ok(Spectrogram {
        values,
        frames,
        bins,
        window_len: u,
        hop: cfg.hop,
    })
}
