use rand::Rng;

use super::layers::{conv, conv_pair, init_conv_pair, Act};
use crate::tensor::{nhwc, Graph, ParamStore, Var};
use crate::{Error, Result};

pub fn init_mmff<R: Rng + ?Sized>(store: &mut ParamStore, c: usize, rng: &mut R) -> Result<()> {
    let d = c / 4;
    for m in ["tfi", "zc"] {
        for p in ["k", "q", "v"] {
            store.init_conv(&format!("mmff.{p}_{m}"), 1, 1, c, d, true, rng)?;
        }
    }
    init_conv_pair(store, "mmff.out", 1, 1, 2 * d, d, d, rng)
}

/// Concatenates the two modalities' projections, shuffles them together and
/// splits the result back into two `[N, HW, D]` halves.
fn mix_pair(g: &mut Graph, a: Var, b: Var, n: usize, hw: usize, d: usize) -> Result<(Var, Var)> {
    let both = g.concat(&[a, b])?;
    let both = g.channel_shuffle(both, 2)?;
    let first = g.split(both, 0, d)?;
    let second = g.split(both, d, d)?;
    Ok((g.reshape(first, &[n, hw, d])?, g.reshape(second, &[n, hw, d])?))
}

/// Cross attention between the fused modality maps. Each modality is
/// projected to keys, queries and values of width D = C/4; the pairs are
/// mixed by concatenation and shuffling; each half attends with
/// `softmax(Q Kᵀ / D)`; the two attended maps are mixed again and projected
/// to the fused map `[N,H,W,D]`.
pub fn mmff(g: &mut Graph, store: &ParamStore, ff_tfi: Var, ff_zc: Var) -> Result<Var> {
    if g.shape(ff_tfi) != g.shape(ff_zc) {
        return Err(Error::param(format!(
            "attention inputs differ: {:?} vs {:?}",
            g.shape(ff_tfi),
            g.shape(ff_zc)
        )));
    }
    let (n, h, w, c) = nhwc(g.shape(ff_tfi), "mmff")?;
    if c % 4 != 0 {
        return Err(Error::config(format!("{c} channels not divisible by 4")));
    }
    let (hw, d) = (h * w, c / 4);
    let proj = |g: &mut Graph, name: &str, x: Var| conv(g, store, x, name, 1);
    let k_t = proj(g, "mmff.k_tfi", ff_tfi)?;
    let q_t = proj(g, "mmff.q_tfi", ff_tfi)?;
    let v_t = proj(g, "mmff.v_tfi", ff_tfi)?;
    let k_z = proj(g, "mmff.k_zc", ff_zc)?;
    let q_z = proj(g, "mmff.q_zc", ff_zc)?;
    let v_z = proj(g, "mmff.v_zc", ff_zc)?;
    let (k1, k2) = mix_pair(g, k_t, k_z, n, hw, d)?;
    let (q1, q2) = mix_pair(g, q_t, q_z, n, hw, d)?;
    let (v1, v2) = mix_pair(g, v_t, v_z, n, hw, d)?;

    let attend = |g: &mut Graph, q: Var, k: Var, v: Var, tap: &str| -> Result<Var> {
        let s = g.matmul(q, k, true)?;
        let s = g.scale(s, 1.0 / d as f64)?;
        let aw = g.softmax(s)?;
        g.tap(tap, aw);
        g.matmul(aw, v, false)
    };
    let f15 = attend(g, q1, k1, v1, "mmff.aw_tfi")?;
    let f16 = attend(g, q2, k2, v2, "mmff.aw_zc")?;
    let both = g.concat(&[f15, f16])?;
    let both = g.channel_shuffle(both, 2)?;
    let both = g.reshape(both, &[n, h, w, 2 * d])?;
    conv_pair(g, store, both, "mmff.out", Act::Relu, Act::Identity)
}
