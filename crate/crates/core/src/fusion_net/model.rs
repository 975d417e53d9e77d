use rand::Rng;

use super::afw::{afw_apply, init_afw, ClassStats};
use super::branches::{extract_image, extract_zc, init_image_backbone, init_zc_branch};
use super::data::{batch_inputs, Inputs, Sample};
use super::layers::conv;
use super::mmff::{init_mmff, mmff};
use super::mmfi::{init_mmfi, mmfi};
use super::smff::{init_smff, smff};
use super::{Arch, NetConfig};
use crate::exec::Exec;
use crate::tensor::{softmax_in_place, Graph, Mode, ParamStore, Var};
use crate::{Error, Result};

/// Parameters, frozen weighting statistics and OOD threshold of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet {
    pub config: NetConfig,
    pub params: ParamStore,
    pub stats: Option<ClassStats>,
    /// Max-softmax threshold; `None` until calibrated.
    pub tau: Option<f64>,
}

/// Graph handles produced by a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub logits: Var,
    /// Fused map before adaptive weighting (fusion architecture only).
    pub fused: Option<Var>,
}

impl FusionNet {
    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut p = ParamStore::new();
        let c = config.channels;
        if config.arch != Arch::ZcCnn {
            init_image_backbone(&mut p, &config, rng)?;
        }
        if config.arch.uses_zc() {
            init_zc_branch(&mut p, &config, rng)?;
        }
        match config.arch {
            Arch::Concat => p.init_conv("concat.proj", 1, 1, 2 * c, config.fused_channels(), true, rng)?,
            Arch::Fusion => {
                init_mmfi(&mut p, c, rng)?;
                init_smff(&mut p, "smff.tfi", c, rng)?;
                init_smff(&mut p, "smff.zc", c, rng)?;
                init_mmff(&mut p, c, rng)?;
                if config.uses_afw() {
                    init_afw(&mut p, config.alpha)?;
                }
            }
            _ => {}
        }
        p.init_linear("head.fc", config.head_channels(), config.class_count, rng)?;
        Ok(Self {
            config,
            params: p,
            stats: None,
            tau: None,
        })
    }

    /// Builds the network on `g`. With `stop_at_fusion` the pass ends at the
    /// fused map (used to gather weighting statistics) and `logits` is that
    /// map.
    pub fn forward(&self, g: &mut Graph, inputs: &Inputs, stop_at_fusion: bool) -> Result<Forward> {
        let image = inputs.image.clone().map(|t| g.constant(t));
        let zc = inputs.zc.clone().map(|t| g.constant(t));
        self.forward_vars(g, image, zc, stop_at_fusion)
    }

    /// Forward pass from graph nodes holding the image and ZC batches.
    pub fn forward_vars(&self, g: &mut Graph, image: Option<Var>, zc: Option<Var>, stop_at_fusion: bool) -> Result<Forward> {
        let cfg = &self.config;
        let p = &self.params;
        let image = |g: &mut Graph| -> Result<Var> {
            let x = image.ok_or_else(|| Error::config("missing image input"))?;
            let f = extract_image(g, p, cfg, x)?;
            g.tap("f_tfi", f);
            Ok(f)
        };
        let zc = |g: &mut Graph| -> Result<Var> {
            let x = zc.ok_or_else(|| Error::config("missing ZC input"))?;
            let f = extract_zc(g, p, cfg, x)?;
            g.tap("f_zc", f);
            Ok(f)
        };
        let mut fused = None;
        let feat = match cfg.arch {
            Arch::IqCnn | Arch::TfiOnly => image(g)?,
            Arch::ZcCnn => zc(g)?,
            Arch::Concat => {
                let (a, b) = (image(g)?, zc(g)?);
                let both = g.concat(&[a, b])?;
                conv(g, p, both, "concat.proj", 1)?
            }
            Arch::Fusion => {
                let (a, b) = (image(g)?, zc(g)?);
                let m = mmfi(g, p, a, b)?;
                let ff_t = smff(g, p, "smff.tfi", m.fc_tfi, m.fs_tfi)?;
                let ff_z = smff(g, p, "smff.zc", m.fc_zc, m.fs_zc)?;
                g.tap("ff_tfi", ff_t);
                g.tap("ff_zc", ff_z);
                let f = mmff(g, p, ff_t, ff_z)?;
                g.tap("f_fusion", f);
                fused = Some(f);
                if stop_at_fusion {
                    return Ok(Forward { logits: f, fused });
                }
                if cfg.uses_afw() {
                    let stats = self
                        .stats
                        .as_ref()
                        .ok_or_else(|| Error::diag("adaptive weighting has no class statistics"))?;
                    afw_apply(g, p, f, stats, cfg.afw_spatial, cfg.afw_channel)?
                } else {
                    f
                }
            }
        };
        if stop_at_fusion {
            return Err(Error::config(format!("{:?} has no fused map", cfg.arch)));
        }
        let pooled = g.gap(feat)?;
        let n = g.shape(pooled)[0];
        let pooled = g.reshape(pooled, &[n, cfg.head_channels()])?;
        let w = g.param(p, "head.fc.w")?;
        let b = g.param(p, "head.fc.b")?;
        let logits = g.linear(pooled, w, b)?;
        Ok(Forward { logits, fused })
    }

    /// Class probabilities for every sample, evaluated in chunks of `batch`
    /// (the result does not depend on the chunking or the strategy).
    pub fn predict(&self, samples: &[Sample], batch: usize, exec: Exec) -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&Sample> = samples.iter().collect();
        let chunks: Vec<&[&Sample]> = refs.chunks(batch.max(1)).collect();
        let parts = exec.map(&chunks, |chunk| -> Result<Vec<Vec<f64>>> {
            let inputs = batch_inputs(&self.config, chunk)?;
            let mut g = Graph::new(Mode::Eval);
            let out = self.forward(&mut g, &inputs, false)?;
            let p = self.config.class_count;
            Ok(g.value(out.logits)
                .data()
                .chunks(p)
                .map(|r| {
                    let mut r = r.to_vec();
                    softmax_in_place(&mut r);
                    r
                })
                .collect())
        });
        let mut probs = Vec::with_capacity(samples.len());
        for part in parts {
            probs.extend(part?);
        }
        Ok(probs)
    }

    /// Current value of the trainable similarity/variance balance.
    pub fn alpha(&self) -> Option<f64> {
        self.params.get("afw.alpha").map(|p| p.value.data()[0])
    }

    /// Spatial `[H x W]` and channel `[D]` weights from the frozen statistics.
    pub fn afw_weights(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let stats = self
            .stats
            .as_ref()
            .ok_or_else(|| Error::diag("model has no weighting statistics"))?;
        let scalar = |n: &str| self.params.value(n).map(|t| t.data()[0]);
        let alpha = scalar("afw.alpha")?;
        let ws = stats.w_spatial(alpha);
        let wc = stats.w_channel(alpha);
        let (a_s, b_s, a_c, b_c) = (scalar("afw.a_s")?, scalar("afw.b_s")?, scalar("afw.a_c")?, scalar("afw.b_c")?);
        Ok((
            ws.iter().map(|w| super::afw::omega(*w, a_s, b_s)).collect(),
            wc.iter().map(|w| super::afw::omega(*w, a_c, b_c)).collect(),
        ))
    }
}
