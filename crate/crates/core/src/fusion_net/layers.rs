use rand::Rng;

use crate::tensor::{Graph, ParamStore, Var};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Act {
    Relu,
    HSwish,
    Sigmoid,
    Identity,
}

pub(crate) fn act(g: &mut Graph, x: Var, a: Act) -> Var {
    match a {
        Act::Relu => g.relu(x),
        Act::HSwish => g.hswish(x),
        Act::Sigmoid => g.sigmoid(x),
        Act::Identity => x,
    }
}

/// Convolution `{prefix}.w` (+ `{prefix}.b` when stored), "same" padding.
pub(crate) fn conv(g: &mut Graph, store: &ParamStore, x: Var, prefix: &str, stride: usize) -> Result<Var> {
    let w = g.param(store, &format!("{prefix}.w"))?;
    let k = g.shape(w)[0];
    let bname = format!("{prefix}.b");
    let b = match store.get(&bname) {
        Some(_) => Some(g.param(store, &bname)?),
        None => None,
    };
    g.conv2d(x, w, b, stride, k / 2)
}

pub(crate) fn init_conv_bn<R: Rng + ?Sized>(
    store: &mut ParamStore,
    prefix: &str,
    k: usize,
    cin: usize,
    cout: usize,
    rng: &mut R,
) -> Result<()> {
    store.init_conv(&format!("{prefix}.conv"), k, k, cin, cout, false, rng)?;
    store.init_bn(&format!("{prefix}.bn"), cout)
}

/// Convolution, batch normalization, activation.
pub(crate) fn conv_bn_act(
    g: &mut Graph,
    store: &ParamStore,
    x: Var,
    prefix: &str,
    stride: usize,
    a: Act,
) -> Result<Var> {
    let y = conv(g, store, x, &format!("{prefix}.conv"), stride)?;
    let y = g.batch_norm(y, store, &format!("{prefix}.bn"))?;
    Ok(act(g, y, a))
}

/// Two biased convolutions with an activation in between and `out` after.
pub(crate) fn conv_pair(
    g: &mut Graph,
    store: &ParamStore,
    x: Var,
    prefix: &str,
    mid: Act,
    out: Act,
) -> Result<Var> {
    let y = conv(g, store, x, &format!("{prefix}_a"), 1)?;
    let y = act(g, y, mid);
    let y = conv(g, store, y, &format!("{prefix}_b"), 1)?;
    Ok(act(g, y, out))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn init_conv_pair<R: Rng + ?Sized>(
    store: &mut ParamStore,
    prefix: &str,
    k1: usize,
    k2: usize,
    cin: usize,
    cmid: usize,
    cout: usize,
    rng: &mut R,
) -> Result<()> {
    store.init_conv(&format!("{prefix}_a"), k1, k1, cin, cmid, true, rng)?;
    store.init_conv(&format!("{prefix}_b"), k2, k2, cmid, cout, true, rng)
}
