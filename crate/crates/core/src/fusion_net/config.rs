use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which inputs and which combination stage a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Raw IQ samples, reshaped to an image, through the image backbone.
    IqCnn,
    /// ZC correlation branch only.
    ZcCnn,
    /// Time-frequency image branch only.
    TfiOnly,
    /// Both branches, channel concatenation and a 1x1 projection.
    Concat,
    /// Both branches with interaction, single-modal fusion and cross attention.
    Fusion,
}

impl Arch {
    pub fn uses_tfi(self) -> bool {
        matches!(self, Arch::TfiOnly | Arch::Concat | Arch::Fusion)
    }

    pub fn uses_zc(self) -> bool {
        matches!(self, Arch::ZcCnn | Arch::Concat | Arch::Fusion)
    }
}

/// One inverted bottleneck of the image backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub cin: usize,
    pub cout: usize,
    pub expand: usize,
    pub stride: usize,
}

impl BlockSpec {
    pub fn residual(&self) -> bool {
        self.stride == 1 && self.cin == self.cout
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub arch: Arch,
    /// Spatial adaptive weighting (only with `Arch::Fusion`).
    pub afw_spatial: bool,
    /// Channel adaptive weighting (only with `Arch::Fusion`).
    pub afw_channel: bool,
    /// Side of the square image input.
    pub image_size: usize,
    /// Channels of the time-frequency image (1 or 3).
    pub tfi_channels: usize,
    /// Rows and columns of the ZC correlation feature.
    pub zc_rows: usize,
    pub zc_cols: usize,
    pub stem_channels: usize,
    /// Branch output channels C.
    pub channels: usize,
    /// Branch output side H = W.
    pub spatial: usize,
    /// Number of inverted bottlenecks.
    pub depth: usize,
    pub class_count: usize,
    /// Initial balance between similarity and variance in the weighting score.
    pub alpha: f64,
    /// Weight of the previous class statistics in each epoch update.
    pub afw_momentum: f64,
}

impl NetConfig {
    pub fn desk(arch: Arch, class_count: usize, zc_rows: usize) -> Self {
        let fused = arch == Arch::Fusion;
        Self {
            arch,
            afw_spatial: fused,
            afw_channel: fused,
            image_size: 32,
            tfi_channels: 1,
            zc_rows,
            zc_cols: 64,
            stem_channels: 16,
            channels: 32,
            spatial: 4,
            depth: 4,
            class_count,
            alpha: 0.5,
            afw_momentum: 0.9,
        }
    }

    /// Fused feature width D = C / 4.
    pub fn fused_channels(&self) -> usize {
        self.channels / 4
    }

    pub fn uses_afw(&self) -> bool {
        self.arch == Arch::Fusion && (self.afw_spatial || self.afw_channel)
    }

    /// Channels fed to the image backbone.
    pub fn image_channels(&self) -> usize {
        if self.arch == Arch::IqCnn {
            2
        } else {
            self.tfi_channels
        }
    }

    /// Width of the map the classification head pools.
    pub fn head_channels(&self) -> usize {
        match self.arch {
            Arch::Concat | Arch::Fusion => self.fused_channels(),
            _ => self.channels,
        }
    }

    /// ZC rows padded to a multiple of nine, and whether padding was needed.
    pub fn zc_padded_rows(&self) -> (usize, bool) {
        let padded = self.zc_rows.div_ceil(9) * 9;
        (padded, padded != self.zc_rows)
    }

    /// Number of stride-2 steps after the stride-2 stem.
    fn downsamples(&self) -> Result<usize> {
        let after_stem = self.image_size / 2;
        let mut side = after_stem;
        let mut n = 0;
        while side > self.spatial {
            if !side.is_multiple_of(2) {
                break;
            }
            side /= 2;
            n += 1;
        }
        if side != self.spatial || !self.image_size.is_multiple_of(2) {
            return Err(Error::config(format!(
                "image side {} cannot be reduced to {} by halving",
                self.image_size, self.spatial
            )));
        }
        Ok(n)
    }

    /// Bottleneck plan: the first blocks halve the resolution and widen
    /// linearly from the stem width to C, the rest keep C with a residual.
    pub fn block_plan(&self) -> Result<Vec<BlockSpec>> {
        let down = self.downsamples()?;
        if down > self.depth {
            return Err(Error::config(format!(
                "depth {} too small for {down} downsampling blocks",
                self.depth
            )));
        }
        let mut cin = self.stem_channels;
        Ok((0..self.depth)
            .map(|i| {
                let (cout, stride) = if i < down {
                    (self.stem_channels + (self.channels - self.stem_channels) * (i + 1) / down, 2)
                } else {
                    (self.channels, 1)
                };
                let b = BlockSpec {
                    cin,
                    cout,
                    expand: 2 * cin,
                    stride,
                };
                cin = cout;
                b
            })
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.class_count < 2 {
            return bad(format!("class_count {} < 2", self.class_count));
        }
        if self.channels == 0 || !self.channels.is_multiple_of(4) {
            return bad(format!("channels {} must be a positive multiple of 4", self.channels));
        }
        if self.stem_channels == 0 || self.stem_channels > self.channels {
            return bad(format!("stem width {} outside 1..={}", self.stem_channels, self.channels));
        }
        if !matches!(self.tfi_channels, 1 | 3) {
            return bad(format!("tfi_channels {} must be 1 or 3", self.tfi_channels));
        }
        if self.spatial < 3 {
            return bad(format!("spatial {} must be at least 3", self.spatial));
        }
        if self.zc_rows == 0 || self.zc_cols == 0 {
            return bad("empty ZC feature".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..1.0).contains(&self.afw_momentum) {
            return bad(format!("afw_momentum {} outside [0, 1)", self.afw_momentum));
        }
        if self.arch != Arch::Fusion && (self.afw_spatial || self.afw_channel) {
            return bad(format!("adaptive weighting needs the fusion architecture, not {:?}", self.arch));
        }
        self.block_plan().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_plan() {
        let c = NetConfig::desk(Arch::Fusion, 6, 9);
        c.validate().unwrap();
        let plan = c.block_plan().unwrap();
        let io: Vec<_> = plan.iter().map(|b| (b.cin, b.cout, b.stride, b.residual())).collect();
        assert_eq!(io, vec![(16, 24, 2, false), (24, 32, 2, false), (32, 32, 1, true), (32, 32, 1, true)]);
        assert_eq!(c.fused_channels(), 8);
        assert_eq!(c.zc_padded_rows(), (9, false));
    }

    #[test]
    fn inconsistent_configs_rejected() {
        let mut c = NetConfig::desk(Arch::Fusion, 6, 9);
        c.channels = 30;
        assert!(c.validate().is_err());
        let mut c = NetConfig::desk(Arch::Fusion, 6, 9);
        c.depth = 1;
        assert!(c.validate().is_err());
        let mut c = NetConfig::desk(Arch::TfiOnly, 6, 9);
        c.afw_spatial = true;
        assert!(c.validate().is_err());
        let mut c = NetConfig::desk(Arch::Fusion, 6, 9);
        c.spatial = 5;
        assert!(c.validate().is_err());
        assert_eq!(NetConfig::desk(Arch::Fusion, 6, 10).zc_padded_rows(), (18, true));
    }
}
