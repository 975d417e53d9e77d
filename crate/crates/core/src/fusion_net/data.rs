use super::branches::{fold_zc, zc_input_channels, ZC_GRID};
use super::{Arch, NetConfig};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// One featurized record. `tfi` is `S x S x ch` row-major, `zc` is
/// `rows x cols`, `iq` is the `S x S x 2` raw-sample image.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tfi: Vec<f64>,
    pub zc: Vec<f64>,
    pub iq: Vec<f64>,
    pub label: usize,
}

/// Network inputs for a batch; unused inputs are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub image: Option<Tensor>,
    pub zc: Option<Tensor>,
}

impl Inputs {
    pub fn batch_size(&self) -> usize {
        self.image.as_ref().or(self.zc.as_ref()).map_or(0, |t| t.shape()[0])
    }
}

/// Stacks the inputs `cfg.arch` needs.
pub fn batch_inputs(cfg: &NetConfig, samples: &[&Sample]) -> Result<Inputs> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::param("empty batch"));
    }
    let s = cfg.image_size;
    let image = match cfg.arch {
        Arch::ZcCnn => None,
        arch => {
            let ch = cfg.image_channels();
            let mut v = Vec::with_capacity(n * s * s * ch);
            for x in samples {
                let src = if arch == Arch::IqCnn { &x.iq } else { &x.tfi };
                if src.len() != s * s * ch {
                    return Err(Error::config(format!(
                        "image input has {} values, model expects {s}x{s}x{ch}",
                        src.len()
                    )));
                }
                v.extend_from_slice(src);
            }
            Some(Tensor::new(&[n, s, s, ch], v)?)
        }
    };
    let zc = if cfg.arch.uses_zc() {
        let ch = zc_input_channels(cfg);
        let mut v = Vec::with_capacity(n * 9 * ch);
        for x in samples {
            if x.zc.len() != cfg.zc_rows * cfg.zc_cols {
                return Err(Error::config(format!(
                    "ZC input has {} values, model expects {}x{}",
                    x.zc.len(),
                    cfg.zc_rows,
                    cfg.zc_cols
                )));
            }
            v.extend(fold_zc(cfg.zc_rows, cfg.zc_cols, &x.zc)?);
        }
        Some(Tensor::new(&[n, ZC_GRID, ZC_GRID, ch], v)?)
    } else {
        None
    };
    Ok(Inputs { image, zc })
}
