use rand::Rng;

use super::layers::{conv, conv_bn_act, init_conv_bn, Act};
use super::NetConfig;
use crate::tensor::{Graph, ParamStore, Var};
use crate::{Error, Result};

/// Side of the grid the ZC rows are folded into.
pub const ZC_GRID: usize = 3;

pub fn init_image_backbone<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &NetConfig, rng: &mut R) -> Result<()> {
    init_conv_bn(store, "tfi.stem", 3, cfg.image_channels(), cfg.stem_channels, rng)?;
    for (i, b) in cfg.block_plan()?.iter().enumerate() {
        let p = format!("tfi.b{i}");
        init_conv_bn(store, &format!("{p}.expand"), 3, b.cin, b.expand, rng)?;
        store.init_depthwise(&format!("{p}.dw"), 3, b.expand, rng)?;
        store.init_bn(&format!("{p}.dw.bn"), b.expand)?;
        let hidden = (b.expand / 4).max(4);
        store.init_conv(&format!("{p}.se_a"), 1, 1, b.expand, hidden, true, rng)?;
        store.init_conv(&format!("{p}.se_b"), 1, 1, hidden, b.expand, true, rng)?;
        init_conv_bn(store, &format!("{p}.proj"), 1, b.expand, b.cout, rng)?;
    }
    init_conv_bn(store, "tfi.head", 1, cfg.channels, cfg.channels, rng)
}

/// Image branch: stride-2 Conv-BN-HSwish stem, inverted bottlenecks
/// (3x3 expansion conv, depthwise conv, squeeze-excitation, 1x1 projection,
/// residual when shapes agree) and a 1x1 Conv-BN-HSwish head.
/// `[N,S,S,ch] -> [N,H,W,C]`.
pub fn extract_image(g: &mut Graph, store: &ParamStore, cfg: &NetConfig, x: Var) -> Result<Var> {
    let s = cfg.image_size;
    let want = [s, s, cfg.image_channels()];
    if g.shape(x).len() != 4 || g.shape(x)[1..] != want {
        return Err(Error::config(format!("image branch expects [N,{s},{s},{}], got {:?}", want[2], g.shape(x))));
    }
    let mut h = conv_bn_act(g, store, x, "tfi.stem", 2, Act::HSwish)?;
    for (i, b) in cfg.block_plan()?.iter().enumerate() {
        let p = format!("tfi.b{i}");
        let input = h;
        let mut y = conv_bn_act(g, store, h, &format!("{p}.expand"), b.stride, Act::HSwish)?;
        let dw = g.param(store, &format!("{p}.dw.w"))?;
        y = g.depthwise_conv2d(y, dw, None, 1, 1)?;
        y = g.batch_norm(y, store, &format!("{p}.dw.bn"))?;
        y = g.hswish(y);
        let mut se = g.gap(y)?;
        se = conv(g, store, se, &format!("{p}.se_a"), 1)?;
        se = g.relu(se);
        se = conv(g, store, se, &format!("{p}.se_b"), 1)?;
        se = g.sigmoid(se);
        y = g.mul_bcast(y, se)?;
        y = conv(g, store, y, &format!("{p}.proj.conv"), 1)?;
        y = g.batch_norm(y, store, &format!("{p}.proj.bn"))?;
        h = if b.residual() { g.add(y, input)? } else { y };
    }
    conv_bn_act(g, store, h, "tfi.head", 1, Act::HSwish)
}

/// Channels of the folded ZC input.
pub fn zc_input_channels(cfg: &NetConfig) -> usize {
    cfg.zc_padded_rows().0 / (ZC_GRID * ZC_GRID) * cfg.zc_cols
}

/// Folds a `rows x cols` ZC feature into the `[3,3,ch]` layout the ZC branch
/// reads: row `r` goes to grid cell `r mod 9`, channel block `r div 9`.
/// Missing rows up to the next multiple of nine are zero.
pub fn fold_zc(rows: usize, cols: usize, data: &[f64]) -> Result<Vec<f64>> {
    if data.len() != rows * cols {
        return Err(Error::param(format!("ZC feature has {} values, expected {rows}x{cols}", data.len())));
    }
    let cells = ZC_GRID * ZC_GRID;
    let blocks = rows.div_ceil(cells);
    let ch = blocks * cols;
    let mut out = vec![0.0; cells * ch];
    for r in 0..rows {
        let (cell, block) = (r % cells, r / cells);
        out[cell * ch + block * cols..cell * ch + (block + 1) * cols].copy_from_slice(&data[r * cols..(r + 1) * cols]);
    }
    Ok(out)
}

pub fn init_zc_branch<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &NetConfig, rng: &mut R) -> Result<()> {
    let c = cfg.channels;
    init_conv_bn(store, "zc.c0", 3, zc_input_channels(cfg), c, rng)?;
    for i in 1..5 {
        init_conv_bn(store, &format!("zc.c{i}"), 3, c, c, rng)?;
    }
    Ok(())
}

/// ZC branch: two Conv-BN-ReLU stages on the folded 3x3 grid, nearest
/// upsampling to H x W, three more Conv-BN-ReLU stages.
/// `[N,3,3,ch] -> [N,H,W,C]`.
pub fn extract_zc(g: &mut Graph, store: &ParamStore, cfg: &NetConfig, x: Var) -> Result<Var> {
    let want = [ZC_GRID, ZC_GRID, zc_input_channels(cfg)];
    if g.shape(x).len() != 4 || g.shape(x)[1..] != want {
        return Err(Error::config(format!("ZC branch expects [N,3,3,{}], got {:?}", want[2], g.shape(x))));
    }
    let mut h = x;
    for i in 0..2 {
        h = conv_bn_act(g, store, h, &format!("zc.c{i}"), 1, Act::Relu)?;
    }
    h = g.upsample_nn(h, cfg.spatial, cfg.spatial)?;
    for i in 2..5 {
        h = conv_bn_act(g, store, h, &format!("zc.c{i}"), 1, Act::Relu)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_places_rows_on_the_grid() {
        let data: Vec<f64> = (0..10 * 2).map(|v| v as f64).collect();
        let f = fold_zc(10, 2, &data).unwrap();
        // 2 blocks x 2 cols = 4 channels per cell.
        assert_eq!(f.len(), 9 * 4);
        assert_eq!(&f[0..4], &[0.0, 1.0, 18.0, 19.0]);
        assert_eq!(&f[4..8], &[2.0, 3.0, 0.0, 0.0]);
        assert!(fold_zc(10, 2, &data[1..]).is_err());
    }
}
