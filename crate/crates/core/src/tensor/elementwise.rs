use super::{nhwc, Graph, Tensor, Var};
use crate::{Error, Result};

fn same_shape(g: &Graph, a: Var, b: Var, what: &str) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        return Err(Error::param(format!(
            "{what}: shapes {:?} and {:?} differ",
            g.shape(a),
            g.shape(b)
        )));
    }
    Ok(())
}

fn scalar_var(g: &Graph, s: Var, what: &str) -> Result<()> {
    if g.value(s).len() != 1 {
        return Err(Error::param(format!("{what}: expected a single value, got shape {:?}", g.shape(s))));
    }
    Ok(())
}

/// Maps each element of `big` to the element of `small` it is multiplied
/// with. `small` is `[n, 1, 1, C]` (per-channel) or `[n, H, W, 1]`
/// (per-position) against `big = [N, H, W, C]`, where `n` is `N` or 1.
fn bcast_index(big: &[usize], small: &[usize]) -> Result<impl Fn(usize) -> usize + 'static> {
    let (n, h, w, c) = nhwc(big, "broadcast")?;
    let (sn, sh, sw, sc) = nhwc(small, "broadcast")?;
    let batch_ok = sn == n || sn == 1;
    let per_channel = (sh, sw, sc) == (1, 1, c);
    let per_position = (sh, sw, sc) == (h, w, 1);
    if !batch_ok || !(per_channel || per_position) {
        return Err(Error::param(format!(
            "broadcast of {small:?} against {big:?}: only [N|1,1,1,C] and [N|1,H,W,1] are supported"
        )));
    }
    let batch_stride = if sn == 1 { 0 } else { sh * sw * sc };
    Ok(move |i: usize| {
        let ch = i % c;
        let pos = (i / c) % (h * w);
        let b = i / (c * h * w);
        let inner = if per_channel { ch } else { pos };
        b * batch_stride + inner
    })
}

impl Graph {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, a, b, "add")?;
        let v: Vec<f64> = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(self.shape(a), v)?;
        Ok(self.push(out, &[a, b], Box::new(|g, _, _| vec![Some(g.to_vec()), Some(g.to_vec())])))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, a, b, "sub")?;
        let v: Vec<f64> = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x - y).collect();
        let out = Tensor::new(self.shape(a), v)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|g, _, _| vec![Some(g.to_vec()), Some(g.iter().map(|x| -x).collect())]),
        ))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, a, b, "mul")?;
        let v: Vec<f64> = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(self.shape(a), v)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|g, _, ins| {
                let (a, b) = (ins[0].data(), ins[1].data());
                vec![
                    Some(g.iter().zip(b).map(|(g, y)| g * y).collect()),
                    Some(g.iter().zip(a).map(|(g, x)| g * x).collect()),
                ]
            }),
        ))
    }

    /// `x * s` where `s` is a per-channel `[n,1,1,C]` or per-position
    /// `[n,H,W,1]` tensor (`n` = batch or 1).
    pub fn mul_bcast(&mut self, x: Var, s: Var) -> Result<Var> {
        let idx = bcast_index(self.shape(x), self.shape(s))?;
        let (xv, sv) = (self.value(x).data(), self.value(s).data());
        let v: Vec<f64> = xv.iter().enumerate().map(|(i, a)| a * sv[idx(i)]).collect();
        let out = Tensor::new(self.shape(x), v)?;
        Ok(self.push(
            out,
            &[x, s],
            Box::new(move |g, _, ins| {
                let (xv, sv) = (ins[0].data(), ins[1].data());
                let gx = g.iter().enumerate().map(|(i, g)| g * sv[idx(i)]).collect();
                let mut gs = vec![0.0; sv.len()];
                for (i, (g, a)) in g.iter().zip(xv).enumerate() {
                    gs[idx(i)] += g * a;
                }
                vec![Some(gx), Some(gs)]
            }),
        ))
    }

    /// Multiplies by a fixed constant.
    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = Tensor::new(self.shape(x), self.value(x).data().iter().map(|v| v * c).collect())?;
        Ok(self.push(out, &[x], Box::new(move |g, _, _| vec![Some(g.iter().map(|g| g * c).collect())])))
    }

    /// `x * s` for a single-valued variable `s`.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        scalar_var(self, s, "mul_scalar")?;
        let k = self.value(s).data()[0];
        let out = Tensor::new(self.shape(x), self.value(x).data().iter().map(|v| v * k).collect())?;
        Ok(self.push(
            out,
            &[x, s],
            Box::new(|g, _, ins| {
                let k = ins[1].data()[0];
                let gs: f64 = g.iter().zip(ins[0].data()).map(|(g, v)| g * v).sum();
                vec![Some(g.iter().map(|g| g * k).collect()), Some(vec![gs])]
            }),
        ))
    }

    /// `x + s` for a single-valued variable `s`.
    pub fn add_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        scalar_var(self, s, "add_scalar")?;
        let k = self.value(s).data()[0];
        let out = Tensor::new(self.shape(x), self.value(x).data().iter().map(|v| v + k).collect())?;
        Ok(self.push(
            out,
            &[x, s],
            Box::new(|g, _, _| vec![Some(g.to_vec()), Some(vec![g.iter().sum()])]),
        ))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, df: fn(f64, f64) -> f64) -> Var {
        let t = self.value(x);
        let out = Tensor::new(t.shape(), t.data().iter().map(|v| f(*v)).collect()).expect("same shape");
        self.push(
            out,
            &[x],
            Box::new(move |g, out, ins| {
                let gx = g
                    .iter()
                    .zip(ins[0].data())
                    .zip(out.data())
                    .map(|((g, x), y)| g * df(*x, *y))
                    .collect();
                vec![Some(gx)]
            }),
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    /// `x * clamp(x + 3, 0, 6) / 6`.
    pub fn hswish(&mut self, x: Var) -> Var {
        self.unary(x, hswish, |x, _| {
            if x <= -3.0 {
                0.0
            } else if x >= 3.0 {
                1.0
            } else {
                (2.0 * x + 3.0) / 6.0
            }
        })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, |_, y| y * (1.0 - y))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let k = *t.shape().last().ok_or_else(|| Error::param("softmax of a rank-0 tensor"))?;
        if k == 0 {
            return Err(Error::param("softmax over an empty axis"));
        }
        let mut v = t.data().to_vec();
        v.chunks_mut(k).for_each(softmax_in_place);
        let out = Tensor::new(t.shape(), v)?;
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, out, _| {
                let mut gx = vec![0.0; g.len()];
                for ((gx, g), y) in gx.chunks_mut(k).zip(g.chunks(k)).zip(out.data().chunks(k)) {
                    let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                    for ((gx, g), y) in gx.iter_mut().zip(g).zip(y) {
                        *gx = y * (g - dot);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn hswish(x: f64) -> f64 {
    x * (x + 3.0).clamp(0.0, 6.0) / 6.0
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    row.iter_mut().for_each(|v| *v /= s);
}
