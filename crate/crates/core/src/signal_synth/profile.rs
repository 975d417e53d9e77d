use std::collections::HashSet;

use super::zc::check_root;
use crate::error::{Error, Result};

/// A Zadoff-Chu root `r` together with its sequence length `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ZcRoot {
    pub root: u32,
    pub len: u32,
}

impl ZcRoot {
    pub const fn new(root: u32, len: u32) -> Self {
        Self { root, len }
    }
}

/// Generative description of one signal class.
///
/// A transmitting profile emits frames of `frame_len` samples separated by
/// exponentially distributed gaps. Each frame optionally starts with a
/// preamble block (constant-envelope chirp, then the primary ZC root, then
/// possibly a secondary root) followed by an OFDM body of random QPSK
/// symbols occupying `bandwidth_frac` of the sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolProfile {
    pub name: String,
    pub class_id: u32,
    /// `false` for the background-noise class: records are pure AWGN.
    pub transmits: bool,
    pub uses_zc: bool,
    pub zc_roots: Vec<ZcRoot>,
    /// Index into `zc_roots` of the most frequently used root.
    pub primary_root: usize,
    /// Probability that a preamble-bearing frame also carries one of the
    /// secondary roots after the primary one.
    pub secondary_prob: f64,
    /// ZC upsampling factor (sample rate over occupied bandwidth).
    pub upsample: usize,
    /// Power of the preamble relative to the unit-power OFDM body.
    pub preamble_boost_db: f64,
    /// Length of the leading chirp preamble; 0 disables it.
    pub chirp_len: usize,
    pub bandwidth_frac: f64,
    pub n_subcarriers: usize,
    pub frame_len: usize,
    pub frame_gap_mean: f64,
    /// Samples between centre-frequency hops; 0 means no hopping.
    pub hop_period: usize,
    pub hop_channels: usize,
    pub preamble_prob: f64,
}

impl ProtocolProfile {
    /// Background-noise profile: emits nothing.
    pub fn noise_only(class_id: u32) -> Self {
        Self {
            name: "background-noise".into(),
            class_id,
            transmits: false,
            uses_zc: false,
            zc_roots: Vec::new(),
            primary_root: 0,
            secondary_prob: 0.0,
            upsample: 8,
            preamble_boost_db: 0.0,
            chirp_len: 0,
            bandwidth_frac: 1.0,
            n_subcarriers: 1,
            frame_len: 1,
            frame_gap_mean: 0.0,
            hop_period: 0,
            hop_channels: 1,
            preamble_prob: 0.0,
        }
    }

    pub fn primary(&self) -> Option<ZcRoot> {
        if self.uses_zc {
            self.zc_roots.get(self.primary_root).copied()
        } else {
            None
        }
    }

    /// Length of the upsampled ZC preamble for a root.
    pub fn preamble_len(&self, root: ZcRoot) -> usize {
        root.len as usize * self.upsample
    }

    /// Longest possible preamble block (chirp + primary + longest secondary).
    pub fn max_preamble_block(&self) -> usize {
        if !self.uses_zc {
            return 0;
        }
        let primary = self.primary().map_or(0, |r| self.preamble_len(r));
        let secondary = self
            .zc_roots
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.primary_root)
            .map(|(_, r)| self.preamble_len(*r))
            .max()
            .unwrap_or(0);
        self.chirp_len + primary + secondary
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::param(format!("profile '{}': {msg}", self.name)));
        if !(self.bandwidth_frac > 0.0 && self.bandwidth_frac <= 1.0) {
            return bad(format!("bandwidth_frac {} outside (0, 1]", self.bandwidth_frac));
        }
        if self.frame_len == 0 {
            return bad("frame_len must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.preamble_prob) || !(0.0..=1.0).contains(&self.secondary_prob) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if !(self.frame_gap_mean >= 0.0 && self.frame_gap_mean.is_finite()) {
            return bad("frame_gap_mean must be finite and non-negative".into());
        }
        if self.upsample == 0 {
            return bad("upsample factor must be at least 1".into());
        }
        if self.n_subcarriers == 0 {
            return bad("n_subcarriers must be positive".into());
        }
        if self.hop_period > 0 && self.hop_channels == 0 {
            return bad("hopping profile needs at least one channel".into());
        }
        if self.uses_zc {
            if self.zc_roots.is_empty() {
                return bad("uses_zc requires at least one root".into());
            }
            if self.primary_root >= self.zc_roots.len() {
                return bad("primary_root index out of range".into());
            }
            for r in &self.zc_roots {
                check_root(r.root, r.len)?;
            }
            if self.max_preamble_block() > self.frame_len {
                return bad(format!(
                    "preamble block of {} samples does not fit a {}-sample frame",
                    self.max_preamble_block(),
                    self.frame_len
                ));
            }
        }
        Ok(())
    }
}

/// Checks a profile set: each profile valid, class ids distinct, and the
/// most frequently used root distinct across profiles.
pub fn validate_profile_set(profiles: &[ProtocolProfile]) -> Result<()> {
    let mut ids = HashSet::new();
    let mut primaries = HashSet::new();
    for p in profiles {
        p.validate()?;
        if !ids.insert(p.class_id) {
            return Err(Error::param(format!("duplicate class id {}", p.class_id)));
        }
        if let Some(root) = p.primary() {
            if !primaries.insert(root) {
                return Err(Error::param(format!(
                    "primary root {}/{} used by more than one profile",
                    root.root, root.len
                )));
            }
        }
    }
    Ok(())
}

/// Candidate roots correlated against every record, in feature-row order.
///
/// Rows 0..4 are the primary roots of the in-distribution ZC classes, row 4 is
/// the root used by the out-of-distribution ZC class, the rest are roots of
/// protocols that never appear in the corpus. All candidates use the longer
/// length so the correlation floor stays well below a true match.
pub fn desk_candidates() -> Vec<ZcRoot> {
    [25, 43, 61, 79, 97, 7, 113, 130, 88]
        .into_iter()
        .map(|r| ZcRoot::new(r, 139))
        .collect()
}

/// Roots that only ever appear as secondary preambles; they are shared
/// between profiles and are not correlation candidates.
pub const SHARED_SECONDARY: [ZcRoot; 2] = [ZcRoot::new(70, 139), ZcRoot::new(52, 63)];

fn ofdm(name: &str, class_id: u32, bw: f64, n_sub: usize, frame_len: usize, gap: f64) -> ProtocolProfile {
    ProtocolProfile {
        name: name.into(),
        class_id,
        transmits: true,
        uses_zc: false,
        zc_roots: Vec::new(),
        primary_root: 0,
        secondary_prob: 0.0,
        upsample: 8,
        preamble_boost_db: 10.0,
        chirp_len: 0,
        bandwidth_frac: bw,
        n_subcarriers: n_sub,
        frame_len,
        frame_gap_mean: gap,
        hop_period: 0,
        hop_channels: 1,
        preamble_prob: 0.0,
    }
}

fn with_zc(mut p: ProtocolProfile, primary: ZcRoot, secondary: ZcRoot) -> ProtocolProfile {
    p.uses_zc = true;
    p.zc_roots = vec![primary, secondary];
    p.primary_root = 0;
    p.secondary_prob = 0.2;
    p.preamble_prob = 1.0;
    p
}

/// The desk-scale corpus: six in-distribution classes (0 = background noise)
/// followed by two out-of-distribution classes (6: ZC at a root no
/// in-distribution class uses, 7: no ZC).
///
/// A desk record spans only a handful of frames, so every frame of a ZC
/// profile carries its preamble; `preamble_prob < 1` remains supported.
pub fn desk_profiles() -> Vec<ProtocolProfile> {
    let cand = desk_candidates();
    let [s139, s63] = SHARED_SECONDARY;

    let mut video_a = with_zc(ofdm("ofdm-video-a", 1, 0.50, 64, 3600, 300.0), cand[0], s139);
    video_a.chirp_len = 256;
    let video_b = with_zc(ofdm("ofdm-video-b", 2, 0.70, 128, 3400, 300.0), cand[1], s139);
    let video_c = with_zc(ofdm("ofdm-video-c", 3, 0.30, 32, 3400, 200.0), cand[2], s63);
    let video_d = with_zc(ofdm("ofdm-video-d", 4, 0.85, 64, 4200, 400.0), cand[3], s63);
    let mut control = ofdm("fhss-control", 5, 0.06, 16, 3000, 1500.0);
    control.hop_period = 1000;
    control.hop_channels = 8;

    let mut ood_zc = with_zc(ofdm("ood-ofdm-unseen-root", 6, 0.50, 64, 3600, 300.0), cand[4], s139);
    ood_zc.chirp_len = 256;
    let ood_plain = ofdm("ood-ofdm-no-zc", 7, 0.33, 32, 3400, 300.0);

    vec![
        ProtocolProfile::noise_only(0),
        video_a,
        video_b,
        video_c,
        video_d,
        control,
        ood_zc,
        ood_plain,
    ]
}

/// Number of in-distribution classes in [`desk_profiles`].
pub const DESK_ID_CLASSES: usize = 6;
