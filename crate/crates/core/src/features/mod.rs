//! Model inputs derived from an [`IqRecord`](crate::signal_synth::IqRecord):
//! the time-frequency image and the ZC correlation feature, plus their
//! on-disk container.

mod container;
mod corr;
mod fft;
mod stft;
mod tfi;

pub use container::{decode_tns, encode_tns, read_tns, write_tns, DType, TensorBlob, TNS_MAGIC};
pub use corr::{
    pool_row, segment_sample, segment_starts, xcorr_norm, zc_feature, Candidate, PoolParams, SamplerParams, ZcBank,
    ZcFeature,
};
pub use fft::{fft_in_place, next_pow2};
pub use stft::{stft, Spectrogram, StftConfig, Window};
pub use tfi::{resize_bilinear, to_tfi, TfiTensor, LOG_FLOOR};

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::signal_synth::{IqRecord, ZcRoot};

/// Everything needed to featurize a record.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub tfi_height: usize,
    pub tfi_width: usize,
    pub tfi_channels: usize,
    pub candidates: Vec<Candidate>,
    pub pool: PoolParams,
    pub sampler: SamplerParams,
}

impl FeatureConfig {
    pub fn desk(candidates: &[ZcRoot]) -> Self {
        Self {
            stft: StftConfig::default(),
            tfi_height: 32,
            tfi_width: 32,
            tfi_channels: 1,
            candidates: candidates.iter().map(|r| Candidate { root: *r, factor: 8 }).collect(),
            pool: PoolParams::default(),
            sampler: SamplerParams::default(),
        }
    }
}

/// The two model inputs of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePair {
    pub tfi: TfiTensor,
    pub zc: ZcFeature,
}

/// Featurizer with its candidate references prepared once.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pub config: FeatureConfig,
    bank: ZcBank,
}

impl Featurizer {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.stft.validate()?;
        let bank = ZcBank::new(&config.candidates)?;
        let needed = config.pool.block * config.pool.blocks + bank.max_ref_len();
        if config.sampler.n_seg * config.sampler.seg_len < needed {
            return Err(Error::config(format!(
                "sampler yields {} samples, pooling needs {needed}",
                config.sampler.n_seg * config.sampler.seg_len
            )));
        }
        Ok(Self { config, bank })
    }

    pub fn bank(&self) -> &ZcBank {
        &self.bank
    }

    pub fn tfi(&self, rec: &IqRecord) -> Result<TfiTensor> {
        let spec = stft(&rec.samples, &self.config.stft)?;
        to_tfi(&spec, self.config.tfi_height, self.config.tfi_width, self.config.tfi_channels)
    }

    pub fn zc<R: Rng + ?Sized>(&self, rec: &IqRecord, rng: &mut R, exec: Exec) -> Result<ZcFeature> {
        zc_feature(rec, &self.bank, self.config.pool, self.config.sampler, rng, exec)
    }

    pub fn featurize<R: Rng + ?Sized>(&self, rec: &IqRecord, rng: &mut R, exec: Exec) -> Result<FeaturePair> {
        rec.validate()?;
        Ok(FeaturePair {
            tfi: self.tfi(rec)?,
            zc: self.zc(rec, rng, exec)?,
        })
    }
}

/// Raw-IQ image for the IQ-input baseline: the first `height * width`
/// samples laid out row-major with I and Q as two channels, scaled to unit
/// RMS.
pub fn iq_image(rec: &IqRecord, height: usize, width: usize) -> Result<Vec<f64>> {
    let n = height * width;
    if rec.samples.len() < n {
        return Err(Error::param(format!("record of {} samples cannot fill a {height}x{width} image", rec.len())));
    }
    let head = &rec.samples[..n];
    let rms = (head.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 0.0 };
    Ok(head.iter().flat_map(|s| [s.re * scale, s.im * scale]).collect())
}

impl TfiTensor {
    pub fn to_blob(&self) -> TensorBlob {
        TensorBlob {
            dims: vec![self.height, self.width, self.channels],
            data: self.values.clone(),
        }
    }

    pub fn from_blob(blob: TensorBlob) -> Result<Self> {
        match blob.dims[..] {
            [h, w, c] => Ok(Self {
                values: blob.data,
                height: h,
                width: w,
                channels: c,
                degenerate: false,
            }),
            _ => Err(Error::format(format!("TFI tensor must be rank 3, got {:?}", blob.dims))),
        }
    }
}

impl ZcFeature {
    pub fn to_blob(&self) -> TensorBlob {
        TensorBlob {
            dims: vec![self.rows, self.cols],
            data: self.values.clone(),
        }
    }

    /// Rebuilds a feature from its container; roots and pooling come from the
    /// featurizer configuration that produced it.
    pub fn from_blob(blob: TensorBlob, roots: &[ZcRoot], pool: PoolParams) -> Result<Self> {
        match blob.dims[..] {
            [r, c] if r == roots.len() => Ok(Self {
                values: blob.data,
                rows: r,
                cols: c,
                roots: roots.to_vec(),
                pool,
            }),
            _ => Err(Error::format(format!(
                "ZC feature dims {:?} do not match {} candidate rows",
                blob.dims,
                roots.len()
            ))),
        }
    }
}
