use num_complex::Complex64;
use rand::Rng;

use super::fft::{fft_in_place, next_pow2};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::signal_synth::{zc_reference, IqRecord, ZcRoot};

/// How the record is subsampled before correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerParams {
    pub n_seg: usize,
    pub seg_len: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { n_seg: 1, seg_len: 7600 }
    }
}

/// Block-max pooling of the correlation output: `blocks` columns of `block`
/// lags each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolParams {
    pub block: usize,
    pub blocks: usize,
}

impl Default for PoolParams {
    fn default() -> Self {
        Self { block: 100, blocks: 64 }
    }
}

/// Candidate reference: a ZC root and its upsampling factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub root: ZcRoot,
    pub factor: usize,
}

/// ZC correlation feature: one pooled row per candidate, `rows x cols`
/// row-major, entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ZcFeature {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub roots: Vec<ZcRoot>,
    pub pool: PoolParams,
}

impl ZcFeature {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_max(&self, i: usize) -> f64 {
        self.row(i).iter().cloned().fold(0.0, f64::max)
    }
}

/// Start indices of `n_seg` disjoint, ordered segments of `seg_len` samples
/// placed uniformly at random inside `len` samples.
pub fn segment_starts<R: Rng + ?Sized>(len: usize, n_seg: usize, seg_len: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n_seg == 0 || seg_len == 0 {
        return Err(Error::param("segment count and length must be positive"));
    }
    let total = n_seg
        .checked_mul(seg_len)
        .filter(|t| *t <= len)
        .ok_or_else(|| Error::param(format!("{n_seg} segments of {seg_len} do not fit in {len} samples")))?;
    let slack = len - total;
    // offsets drawn with replacement then sorted: the i-th segment starts
    // after i full segments plus the i-th smallest offset
    let mut offsets: Vec<usize> = (0..n_seg).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    Ok(offsets.iter().enumerate().map(|(i, o)| o + i * seg_len).collect())
}

/// Concatenation of `n_seg` random non-overlapping segments, in source order.
pub fn segment_sample<R: Rng + ?Sized>(
    x: &[Complex64],
    n_seg: usize,
    seg_len: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let starts = segment_starts(x.len(), n_seg, seg_len, rng)?;
    Ok(starts.iter().flat_map(|s| x[*s..*s + seg_len].iter().copied()).collect())
}

/// Reference sequence prepared for repeated correlation.
#[derive(Debug, Clone)]
struct PreparedRef {
    len: usize,
    /// Zero-mean reference, zero padded and transformed, for a given FFT size.
    spectrum: Vec<Complex64>,
    var: f64,
}

fn prepare_ref(y: &[Complex64], n_fft: usize) -> PreparedRef {
    let la = y.len();
    let mean = y.iter().sum::<Complex64>() / la as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for (b, v) in buf.iter_mut().zip(y) {
        *b = v - mean;
    }
    let var = buf[..la].iter().map(|v| v.norm_sqr()).sum::<f64>() / la as f64;
    fft_in_place(&mut buf, false);
    PreparedRef { len: la, spectrum: buf, var }
}

/// Sliding-window statistics and spectrum of the signal being searched.
struct PreparedSignal {
    len: usize,
    spectrum: Vec<Complex64>,
    prefix: Vec<Complex64>,
    prefix_pow: Vec<f64>,
    mean_power: f64,
}

fn prepare_signal(x: &[Complex64], n_fft: usize) -> PreparedSignal {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    let mut prefix_pow = Vec::with_capacity(x.len() + 1);
    let (mut s, mut p) = (Complex64::new(0.0, 0.0), 0.0);
    prefix.push(s);
    prefix_pow.push(p);
    for v in x {
        s += v;
        p += v.norm_sqr();
        prefix.push(s);
        prefix_pow.push(p);
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    buf[..x.len()].copy_from_slice(x);
    fft_in_place(&mut buf, false);
    PreparedSignal {
        len: x.len(),
        spectrum: buf,
        mean_power: p / x.len().max(1) as f64,
        prefix,
        prefix_pow,
    }
}

fn correlate(r: &PreparedRef, s: &PreparedSignal) -> Vec<f64> {
    let la = r.len;
    let lags = s.len - la;
    let mut prod: Vec<Complex64> = r
        .spectrum
        .iter()
        .zip(&s.spectrum)
        .map(|(y, x)| y.conj() * x)
        .collect();
    fft_in_place(&mut prod, true);
    let silent = 1e-12 * s.mean_power;
    (0..lags)
        .map(|m| {
            let mean = (s.prefix[m + la] - s.prefix[m]) / la as f64;
            let var = (s.prefix_pow[m + la] - s.prefix_pow[m]) / la as f64 - mean.norm_sqr();
            if !(var > silent) || r.var <= 0.0 {
                return 0.0;
            }
            (prod[m].norm() / (la as f64 * (r.var * var).sqrt())).clamp(0.0, 1.0)
        })
        .collect()
}

/// Normalised cross-correlation `gamma(m)`, `m = 0 .. L - L_a`.
///
/// `gamma(m) = |sum_k y1(k) x1*(k+m)| / (L_a sqrt(var(y) var(x[m..m+L_a])))`
/// with both windows mean-removed. Windows of zero variance give 0.
pub fn xcorr_norm(y: &[Complex64], x: &[Complex64]) -> Result<Vec<f64>> {
    if y.is_empty() || x.len() <= y.len() {
        return Err(Error::param(format!(
            "signal of {} samples must be longer than reference of {}",
            x.len(),
            y.len()
        )));
    }
    let n_fft = next_pow2(x.len());
    Ok(correlate(&prepare_ref(y, n_fft), &prepare_signal(x, n_fft)))
}

/// Row of block maxima: `row[i] = max(gamma[i*block .. (i+1)*block])`.
/// Lags past `block * blocks` are dropped.
pub fn pool_row(gamma: &[f64], block: usize, blocks: usize) -> Result<Vec<f64>> {
    if block == 0 || blocks == 0 {
        return Err(Error::param("pool sizes must be positive"));
    }
    if gamma.len() < block * blocks {
        return Err(Error::param(format!(
            "{} correlation lags cannot fill {blocks} blocks of {block}",
            gamma.len()
        )));
    }
    Ok(gamma[..block * blocks]
        .chunks_exact(block)
        .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Candidate references generated once and reused for every record.
#[derive(Debug, Clone)]
pub struct ZcBank {
    candidates: Vec<Candidate>,
    refs: Vec<Vec<Complex64>>,
}

impl ZcBank {
    pub fn new(candidates: &[Candidate]) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::param("at least one candidate root is required"));
        }
        let refs = candidates
            .iter()
            .map(|c| zc_reference(c.root.root, c.root.len, c.factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            candidates: candidates.to_vec(),
            refs,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn max_ref_len(&self) -> usize {
        self.refs.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Pooled correlation rows of an already-sampled sequence.
    pub fn feature_of_sequence(&self, x: &[Complex64], pool: PoolParams, exec: Exec) -> Result<ZcFeature> {
        let needed = pool.block * pool.blocks + self.max_ref_len();
        if x.len() < needed {
            return Err(Error::param(format!(
                "sampled sequence of {} samples is shorter than the {needed} needed for pooling",
                x.len()
            )));
        }
        let n_fft = next_pow2(x.len());
        let signal = prepare_signal(x, n_fft);
        let rows = exec.map(&self.refs, |y| {
            let gamma = correlate(&prepare_ref(y, n_fft), &signal);
            pool_row(&gamma, pool.block, pool.blocks)
        });
        let mut values = Vec::with_capacity(self.len() * pool.blocks);
        for row in rows {
            values.extend(row?);
        }
        Ok(ZcFeature {
            values,
            rows: self.len(),
            cols: pool.blocks,
            roots: self.candidates.iter().map(|c| c.root).collect(),
            pool,
        })
    }
}

/// Segment-samples the record, correlates against every candidate and pools
/// each correlation into one row, rows in candidate order.
pub fn zc_feature<R: Rng + ?Sized>(
    rec: &IqRecord,
    bank: &ZcBank,
    pool: PoolParams,
    sampler: SamplerParams,
    rng: &mut R,
    exec: Exec,
) -> Result<ZcFeature> {
    let x = segment_sample(&rec.samples, sampler.n_seg, sampler.seg_len, rng)?;
    bank.feature_of_sequence(&x, pool, exec)
}
