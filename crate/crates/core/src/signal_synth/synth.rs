use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::profile::ProtocolProfile;
use super::zc::zc_reference;
use crate::error::{Error, Result};

/// Desk-scale sample rate in Hz.
pub const DESK_SAMPLE_RATE: f64 = 1.0e6;
/// Desk-scale record length.
pub const DESK_RECORD_LEN: usize = 1 << 16;

/// Flight-distance bin, mirroring the D00/D01/D10 label codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Distance {
    #[default]
    D00,
    D01,
    D10,
}

impl Distance {
    pub const ALL: [Distance; 3] = [Distance::D00, Distance::D01, Distance::D10];

    /// Attenuation used as the distance proxy.
    pub fn attenuation_db(self) -> f64 {
        match self {
            Distance::D00 => 0.0,
            Distance::D01 => 6.0,
            Distance::D10 => 12.0,
        }
    }
}

/// Line-of-sight condition, mirroring the S00 (LoS) / S01 (NLoS) codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Los {
    #[default]
    S00,
    S01,
}

/// Extra attenuation applied to non-line-of-sight links.
pub const NLOS_PENALTY_DB: f64 = 20.0;
/// Spectral tilt across the band for non-line-of-sight links.
pub const NLOS_TILT_DB: f64 = 6.0;

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::D00 => "D00",
            Distance::D01 => "D01",
            Distance::D10 => "D10",
        })
    }
}

impl FromStr for Distance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D00" => Ok(Distance::D00),
            "D01" => Ok(Distance::D01),
            "D10" => Ok(Distance::D10),
            _ => Err(Error::format(format!("unknown distance tag '{s}'"))),
        }
    }
}

impl fmt::Display for Los {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Los::S00 => "S00",
            Los::S01 => "S01",
        })
    }
}

impl FromStr for Los {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S00" => Ok(Los::S00),
            "S01" => Ok(Los::S01),
            _ => Err(Error::format(format!("unknown LoS tag '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordMeta {
    pub distance: Distance,
    pub los: Los,
}

/// Complex baseband record with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct IqRecord {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub class_id: u32,
    pub snr_db: f64,
    pub meta: RecordMeta,
}

impl IqRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::param("record has no samples"));
        }
        if self.samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::param("record contains non-finite samples"));
        }
        Ok(())
    }
}

/// AWGN channel. `snr_db` is referenced to the unattenuated signal, so the
/// effective SNR is `snr_db - attenuation_db`. `f64::INFINITY` disables noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub attenuation_db: f64,
    /// Ratio of gain at the lower band edge to the upper band edge.
    pub tilt_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            attenuation_db: 0.0,
            tilt_db: 0.0,
            seed,
        }
    }

    pub fn for_link(snr_db: f64, meta: RecordMeta, seed: u64) -> Self {
        let mut cfg = Self::awgn(snr_db, seed);
        cfg.attenuation_db = meta.distance.attenuation_db();
        if meta.los == Los::S01 {
            cfg.attenuation_db += NLOS_PENALTY_DB;
            cfg.tilt_db = NLOS_TILT_DB;
        }
        cfg
    }

    fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::param("snr_db must be finite or +inf"));
        }
        if !self.attenuation_db.is_finite() || !self.tilt_db.is_finite() {
            return Err(Error::param("attenuation and tilt must be finite"));
        }
        Ok(())
    }
}

/// Seeded generator used for every synthetic draw.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, std_per_part: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * std_per_part, im * std_per_part)
}

fn add_noise<R: Rng + ?Sized>(x: &mut [Complex64], noise_var: f64, rng: &mut R) {
    if noise_var <= 0.0 {
        return;
    }
    let sd = (noise_var / 2.0).sqrt();
    for s in x.iter_mut() {
        *s += complex_gaussian(rng, sd);
    }
}

pub(crate) fn mean_power(x: &[Complex64]) -> f64 {
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len().max(1) as f64
}

/// Adds complex white Gaussian noise with variance `P_signal / 10^(snr/10)`,
/// split evenly between the real and imaginary parts. `+inf` returns the
/// input unchanged.
pub fn add_awgn<R: Rng + ?Sized>(x: &[Complex64], snr_db: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::param("cannot add noise to an empty sequence"));
    }
    if snr_db.is_nan() {
        return Err(Error::param("snr_db is NaN"));
    }
    let mut out = x.to_vec();
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let noise_var = mean_power(x) / 10f64.powf(snr_db / 10.0);
    add_noise(&mut out, noise_var, rng);
    Ok(out)
}

/// Linear chirp sweeping the occupied band at body power.
fn chirp(len: usize, bw: f64) -> impl Iterator<Item = Complex64> {
    let f0 = -bw / 2.0;
    let rate = bw / len.max(1) as f64;
    (0..len).map(move |n| {
        let n = n as f64;
        Complex64::from_polar(1.0, 2.0 * PI * (f0 * n + 0.5 * rate * n * n))
    })
}

/// Appends random-QPSK OFDM symbols (with quarter-length cyclic prefix) until
/// `out` holds `target` samples. Body power is 1.
fn fill_ofdm<R: Rng + ?Sized>(profile: &ProtocolProfile, out: &mut Vec<Complex64>, target: usize, rng: &mut R) {
    let n_sub = profile.n_subcarriers;
    let sym_len = ((n_sub as f64 / profile.bandwidth_frac).round() as usize).max(n_sub);
    let cp = sym_len / 4;
    let table: Vec<Complex64> = (0..sym_len)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / sym_len as f64))
        .collect();
    let half = (n_sub / 2) as i64;
    let scale = 1.0 / (n_sub as f64).sqrt();
    let qpsk = std::f64::consts::FRAC_1_SQRT_2;
    let mut symbol = vec![Complex64::new(0.0, 0.0); sym_len];
    while out.len() < target {
        symbol.iter_mut().for_each(|s| *s = Complex64::new(0.0, 0.0));
        for k in -half..(n_sub as i64 - half) {
            let d = Complex64::new(
                if rng.random::<bool>() { qpsk } else { -qpsk },
                if rng.random::<bool>() { qpsk } else { -qpsk },
            ) * scale;
            let k = k.rem_euclid(sym_len as i64) as usize;
            for (n, s) in symbol.iter_mut().enumerate() {
                *s += d * table[(k * n) % sym_len];
            }
        }
        let remaining = target - out.len();
        out.extend(symbol[sym_len - cp..].iter().chain(symbol.iter()).take(remaining));
    }
}

/// One frame of exactly `profile.frame_len` samples.
pub fn synth_frame<R: Rng + ?Sized>(profile: &ProtocolProfile, rng: &mut R) -> Result<Vec<Complex64>> {
    profile.validate()?;
    let mut frame = Vec::with_capacity(profile.frame_len);
    if profile.uses_zc && rng.random::<f64>() < profile.preamble_prob {
        let amp = 10f64.powf(profile.preamble_boost_db / 20.0);
        frame.extend(chirp(profile.chirp_len, profile.bandwidth_frac));
        let primary = profile.zc_roots[profile.primary_root];
        frame.extend(zc_reference(primary.root, primary.len, profile.upsample)?.into_iter().map(|s| s * amp));
        let secondaries: Vec<_> = profile
            .zc_roots
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != profile.primary_root)
            .map(|(_, r)| *r)
            .collect();
        if !secondaries.is_empty() && rng.random::<f64>() < profile.secondary_prob {
            let r = secondaries[rng.random_range(0..secondaries.len())];
            frame.extend(zc_reference(r.root, r.len, profile.upsample)?.into_iter().map(|s| s * amp));
        }
    }
    fill_ofdm(profile, &mut frame, profile.frame_len, rng);
    Ok(frame)
}

/// First-order FIR `x[n] + b*x[n-1]` giving `tilt_db` between DC and Nyquist,
/// rescaled to preserve mean power.
fn apply_tilt(x: &mut [Complex64], tilt_db: f64) {
    if tilt_db == 0.0 || x.is_empty() {
        return;
    }
    let g = 10f64.powf(tilt_db / 20.0);
    let b = (g - 1.0) / (g + 1.0);
    let before = mean_power(x);
    let mut prev = Complex64::new(0.0, 0.0);
    for s in x.iter_mut() {
        let cur = *s;
        *s = cur + prev * b;
        prev = cur;
    }
    let after = mean_power(x);
    if after > 0.0 {
        let k = (before / after).sqrt();
        x.iter_mut().for_each(|s| *s *= k);
    }
}

/// Inter-frame gaps are exponential, truncated at this multiple of the mean.
pub const GAP_CAP: f64 = 3.0;

/// A record together with its noiseless signal and activity mask.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub record: IqRecord,
    /// Attenuated, noiseless signal.
    pub clean: Vec<Complex64>,
    /// `true` where a frame is on the air.
    pub active: Vec<bool>,
}

/// Synthesises `len` samples: frames separated by truncated exponential gaps, hopped
/// in frequency for FHSS profiles, then AWGN at `channel.snr_db` measured
/// over the signal-active samples.
pub fn synth_record_detailed<R: Rng + ?Sized>(
    profile: &ProtocolProfile,
    channel: &ChannelConfig,
    len: usize,
    rng: &mut R,
) -> Result<SynthOutput> {
    profile.validate()?;
    channel.validate()?;
    if len == 0 || (profile.transmits && len < profile.frame_len) {
        return Err(Error::param(format!(
            "record length {len} shorter than frame length {}",
            profile.frame_len
        )));
    }
    let mut clean = vec![Complex64::new(0.0, 0.0); len];
    let mut active = vec![false; len];

    if profile.transmits {
        let gap = if profile.frame_gap_mean > 0.0 {
            Some(Exp::new(1.0 / profile.frame_gap_mean).map_err(|e| Error::param(e.to_string()))?)
        } else {
            None
        };
        let mut start = -(rng.random_range(0..profile.frame_len) as i64);
        while start < len as i64 {
            let frame = synth_frame(profile, rng)?;
            for (i, s) in frame.iter().enumerate() {
                let n = start + i as i64;
                if n >= 0 && (n as usize) < len {
                    clean[n as usize] = *s;
                    active[n as usize] = true;
                }
            }
            let g = gap
                .map_or(0.0, |d| d.sample(rng).min(GAP_CAP * profile.frame_gap_mean))
                .round() as i64;
            start += profile.frame_len as i64 + g;
        }

        if profile.hop_period > 0 {
            let margin = profile.bandwidth_frac / 2.0 + 0.02;
            let span = (1.0 - 2.0 * margin).max(0.0);
            let channels = profile.hop_channels;
            for (block, chunk) in clean.chunks_mut(profile.hop_period).enumerate() {
                let ch = rng.random_range(0..channels);
                let fc = if channels > 1 {
                    -0.5 + margin + span * ch as f64 / (channels - 1) as f64
                } else {
                    0.0
                };
                let base = block * profile.hop_period;
                for (i, s) in chunk.iter_mut().enumerate() {
                    *s *= Complex64::from_polar(1.0, 2.0 * PI * fc * (base + i) as f64);
                }
            }
        }
        apply_tilt(&mut clean, channel.tilt_db);
    }

    let n_active = active.iter().filter(|a| **a).count();
    let ref_power = if n_active > 0 {
        clean
            .iter()
            .zip(&active)
            .filter(|(_, a)| **a)
            .map(|(s, _)| s.norm_sqr())
            .sum::<f64>()
            / n_active as f64
    } else {
        1.0
    };
    let gain = 10f64.powf(-channel.attenuation_db / 20.0);
    clean.iter_mut().for_each(|s| *s *= gain);

    let mut samples = clean.clone();
    if channel.snr_db.is_finite() {
        add_noise(&mut samples, ref_power / 10f64.powf(channel.snr_db / 10.0), rng);
    }
    let record = IqRecord {
        samples,
        sample_rate: DESK_SAMPLE_RATE,
        class_id: profile.class_id,
        snr_db: channel.snr_db,
        meta: RecordMeta::default(),
    };
    Ok(SynthOutput { record, clean, active })
}

pub fn synth_record<R: Rng + ?Sized>(
    profile: &ProtocolProfile,
    channel: &ChannelConfig,
    len: usize,
    rng: &mut R,
) -> Result<IqRecord> {
    synth_record_detailed(profile, channel, len, rng).map(|o| o.record)
}

/// Record drawn from a generator seeded with `channel.seed`, tagged with `meta`.
pub fn synth_record_seeded(
    profile: &ProtocolProfile,
    channel: &ChannelConfig,
    len: usize,
    meta: RecordMeta,
) -> Result<IqRecord> {
    let mut rng = seeded_rng(channel.seed);
    let mut rec = synth_record(profile, channel, len, &mut rng)?;
    rec.meta = meta;
    Ok(rec)
}
