//! `RunConfig`: the TOML file behind every subcommand.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zcfuse::eval::AblationId;
use zcfuse::features::{Candidate, FeatureConfig, Featurizer, PoolParams, SamplerParams, StftConfig, Window};
use zcfuse::fusion_net::{NetConfig, TrainConfig};
use zcfuse::signal_synth::{desk_candidates, Distance, Los, RecordMeta, ZcRoot, DESK_RECORD_LEN};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthSection,
    pub features: FeatureSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Protocol class ids to synthesize.
    pub classes: Vec<u32>,
    /// Records per class; record `i` uses `snrs_db[i % snrs_db.len()]`.
    pub records_per_class: usize,
    pub snrs_db: Vec<f64>,
    pub record_len: usize,
    pub distance: String,
    pub los: String,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            classes: (0..8).collect(),
            records_per_class: 10,
            snrs_db: vec![0.0, 10.0],
            record_len: DESK_RECORD_LEN,
            distance: "D00".into(),
            los: "S00".into(),
        }
    }
}

impl SynthSection {
    pub fn meta(&self) -> Result<RecordMeta, CliError> {
        Ok(RecordMeta {
            distance: self.distance.parse::<Distance>()?,
            los: self.los.parse::<Los>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub window_len: usize,
    pub hop: usize,
    /// `hann` or `rectangular`.
    pub window: String,
    pub two_sided: bool,
    pub tfi_size: usize,
    pub tfi_channels: usize,
    /// Candidate roots as `[root, length]`, in feature-row order.
    pub candidate_roots: Vec<[u32; 2]>,
    pub upsample_factor: usize,
    pub pool_block: usize,
    pub pool_blocks: usize,
    pub n_seg: usize,
    pub seg_len: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        let stft = StftConfig::default();
        let pool = PoolParams::default();
        let sampler = SamplerParams::default();
        Self {
            window_len: stft.window_len,
            hop: stft.hop,
            window: "hann".into(),
            two_sided: stft.two_sided,
            tfi_size: 32,
            tfi_channels: 1,
            candidate_roots: desk_candidates().iter().map(|r| [r.root, r.len]).collect(),
            upsample_factor: 8,
            pool_block: pool.block,
            pool_blocks: pool.blocks,
            n_seg: sampler.n_seg,
            seg_len: sampler.seg_len,
        }
    }
}

impl FeatureSection {
    pub fn candidates(&self) -> Vec<ZcRoot> {
        self.candidate_roots.iter().map(|[r, v]| ZcRoot::new(*r, *v)).collect()
    }

    pub fn feature_config(&self) -> Result<FeatureConfig, CliError> {
        let window = match self.window.as_str() {
            "hann" => Window::Hann,
            "rectangular" => Window::Rectangular,
            w => return Err(CliError::user(format!("unknown window '{w}'"))),
        };
        Ok(FeatureConfig {
            stft: StftConfig {
                window_len: self.window_len,
                hop: self.hop,
                window,
                two_sided: self.two_sided,
            },
            tfi_height: self.tfi_size,
            tfi_width: self.tfi_size,
            tfi_channels: self.tfi_channels,
            candidates: self
                .candidates()
                .into_iter()
                .map(|root| Candidate {
                    root,
                    factor: self.upsample_factor,
                })
                .collect(),
            pool: PoolParams {
                block: self.pool_block,
                blocks: self.pool_blocks,
            },
            sampler: SamplerParams {
                n_seg: self.n_seg,
                seg_len: self.seg_len,
            },
        })
    }

    pub fn featurizer(&self) -> Result<Featurizer, CliError> {
        Ok(Featurizer::new(self.feature_config()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub ablation: AblationId,
    /// Class ids the model recognizes, in label order; all others are OOD.
    pub id_classes: Vec<u32>,
    pub alpha: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            ablation: AblationId::FusionProposed,
            id_classes: (0..6).collect(),
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub batch: usize,
    pub ood_classes: Vec<u32>,
    /// Sweep draw sizes.
    pub id_per_class: usize,
    pub ood_per_class: usize,
    pub axis: String,
    pub values: Vec<String>,
    pub repetitions: usize,
    /// SNR of the sweep's base condition when the axis is not `snr`.
    pub base_snr_db: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            batch: 16,
            ood_classes: vec![6, 7],
            id_per_class: 20,
            ood_per_class: 10,
            axis: "snr".into(),
            values: ["-15", "-10", "-5", "0", "5", "10", "15"].iter().map(|s| s.to_string()).collect(),
            repetitions: 1,
            base_snr_db: 10.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::User(m) => CliError::user(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::user(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Network configuration for the model section and feature shapes.
    pub fn net_config(&self) -> NetConfig {
        let mut cfg = self
            .model
            .ablation
            .net_config(self.model.id_classes.len(), self.features.candidate_roots.len());
        cfg.image_size = self.features.tfi_size;
        cfg.tfi_channels = self.features.tfi_channels;
        cfg.zc_cols = self.features.pool_blocks;
        cfg.alpha = self.model.alpha;
        cfg
    }
}
