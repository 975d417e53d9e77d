use rand::Rng;

use super::layers::{act, conv, conv_pair, init_conv_pair, Act};
use crate::tensor::{Graph, ParamStore, Var};
use crate::{Error, Result};

/// Outputs of the cross-modal interaction.
#[derive(Debug, Clone, Copy)]
pub struct MmfiOut {
    pub fc_tfi: Var,
    pub fc_zc: Var,
    pub fs_tfi: Var,
    pub fs_zc: Var,
}

/// Hidden width of the two-layer spatial gate.
pub const SPATIAL_GATE_HIDDEN: usize = 4;

pub fn init_mmfi<R: Rng + ?Sized>(store: &mut ParamStore, c: usize, rng: &mut R) -> Result<()> {
    store.init_conv("mmfi.f5", 1, 1, 2 * c, c, true, rng)?;
    store.init_conv("mmfi.f6", 1, 1, 2 * c, c, true, rng)?;
    init_conv_pair(store, "mmfi.f7", 1, 1, 4 * c, c, c, rng)?;
    store.init_conv("mmfi.f8", 3, 3, 2, 1, true, rng)?;
    store.init_conv("mmfi.f9", 3, 3, 2, 1, true, rng)?;
    init_conv_pair(store, "mmfi.f10", 3, 3, 4, SPATIAL_GATE_HIDDEN, 1, rng)
}

fn gate(g: &mut Graph, store: &ParamStore, x: Var, name: &str) -> Result<Var> {
    let y = conv(g, store, x, name, 1)?;
    Ok(act(g, y, Act::Sigmoid))
}

/// `f + a * f + b * other`, with `a` and `b` broadcast gates.
fn exchange(g: &mut Graph, f: Var, other: Var, own_gate: Var, cross_gate: Var) -> Result<Var> {
    let own = g.mul_bcast(f, own_gate)?;
    let cross = g.mul_bcast(other, cross_gate)?;
    let s = g.add(f, own)?;
    g.add(s, cross)
}

/// Cross-modal interaction. Channel path: global average and max pooling of
/// each modality give per-modality gates F5, F6 and a shared cross gate F7
/// (over the shuffled concatenation of all four pooled vectors). Spatial
/// path: the same with channel-wise pooling and 3x3 convolutions (F8, F9,
/// F10). Each output keeps its own modality through a residual term.
pub fn mmfi(g: &mut Graph, store: &ParamStore, f_tfi: Var, f_zc: Var) -> Result<MmfiOut> {
    if g.shape(f_tfi) != g.shape(f_zc) {
        return Err(Error::param(format!(
            "interaction inputs differ: {:?} vs {:?}",
            g.shape(f_tfi),
            g.shape(f_zc)
        )));
    }
    let (f1, f2) = (g.gap(f_tfi)?, g.gmp(f_tfi)?);
    let (f3, f4) = (g.gap(f_zc)?, g.gmp(f_zc)?);
    let c12 = g.concat(&[f1, f2])?;
    let f5 = gate(g, store, c12, "mmfi.f5")?;
    let c34 = g.concat(&[f3, f4])?;
    let f6 = gate(g, store, c34, "mmfi.f6")?;
    let all = g.concat(&[f1, f2, f3, f4])?;
    let all = g.channel_shuffle(all, 4)?;
    let f7 = conv_pair(g, store, all, "mmfi.f7", Act::Relu, Act::Sigmoid)?;
    let fc_tfi = exchange(g, f_tfi, f_zc, f5, f7)?;
    let fc_zc = exchange(g, f_zc, f_tfi, f6, f7)?;

    let (s1, s2) = (g.gap_spatial(f_tfi)?, g.gmp_spatial(f_tfi)?);
    let (s3, s4) = (g.gap_spatial(f_zc)?, g.gmp_spatial(f_zc)?);
    let c12 = g.concat(&[s1, s2])?;
    let f8 = gate(g, store, c12, "mmfi.f8")?;
    let c34 = g.concat(&[s3, s4])?;
    let f9 = gate(g, store, c34, "mmfi.f9")?;
    let all = g.concat(&[s1, s2, s3, s4])?;
    let all = g.channel_shuffle(all, 4)?;
    let f10 = conv_pair(g, store, all, "mmfi.f10", Act::Relu, Act::Sigmoid)?;
    let fs_tfi = exchange(g, f_tfi, f_zc, f8, f10)?;
    let fs_zc = exchange(g, f_zc, f_tfi, f9, f10)?;

    for (name, v) in [("mmfi.f5", f5), ("mmfi.f6", f6), ("mmfi.f7", f7), ("mmfi.f8", f8), ("mmfi.f9", f9), ("mmfi.f10", f10)] {
        g.tap(name, v);
    }
    Ok(MmfiOut {
        fc_tfi,
        fc_zc,
        fs_tfi,
        fs_zc,
    })
}
