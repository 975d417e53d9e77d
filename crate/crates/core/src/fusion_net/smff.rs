use rand::Rng;

use super::layers::{conv, conv_pair, init_conv_pair, Act};
use crate::tensor::{Graph, ParamStore, Var};
use crate::{Error, Result};

/// `prefix` is `smff.tfi` or `smff.zc`; each modality has its own weights.
pub fn init_smff<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, c: usize, rng: &mut R) -> Result<()> {
    init_conv_pair(store, &format!("{prefix}.f11"), 1, 1, 2 * c, c, c, rng)?;
    init_conv_pair(store, &format!("{prefix}.f12"), 3, 1, 2 * c, c, c, rng)?;
    store.init_conv(&format!("{prefix}.ff"), 1, 1, 2 * c, c, true, rng)
}

/// Single-modal fusion of the channel-path and spatial-path outputs: a
/// channel weight F11 from the pooled shuffled mix, a position weight F12
/// from the mix itself, their product F13 scaling both inputs before a 1x1
/// projection back to C channels.
pub fn smff(g: &mut Graph, store: &ParamStore, prefix: &str, fc: Var, fs: Var) -> Result<Var> {
    if g.shape(fc) != g.shape(fs) {
        return Err(Error::param(format!(
            "fusion inputs differ: {:?} vs {:?}",
            g.shape(fc),
            g.shape(fs)
        )));
    }
    let mix = g.concat(&[fc, fs])?;
    let mix = g.channel_shuffle(mix, 2)?;
    let pooled = g.gap(mix)?;
    let f11 = conv_pair(g, store, pooled, &format!("{prefix}.f11"), Act::Relu, Act::Sigmoid)?;
    let f12 = conv_pair(g, store, mix, &format!("{prefix}.f12"), Act::Relu, Act::Sigmoid)?;
    let f13 = g.mul_bcast(f12, f11)?;
    g.tap(&format!("{prefix}.f13"), f13);
    let a = g.mul(f13, fc)?;
    let b = g.mul(f13, fs)?;
    let both = g.concat(&[a, b])?;
    conv(g, store, both, &format!("{prefix}.ff"), 1)
}
