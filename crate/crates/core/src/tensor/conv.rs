use super::{nhwc, Graph, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Geom {
    n: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
}

impl Geom {
    fn new(n: usize, h: usize, w: usize, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<Self> {
        if stride == 0 || kh == 0 || kw == 0 {
            return Err(Error::param("convolution with zero stride or kernel size"));
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(Error::param(format!("kernel {kh}x{kw} larger than padded input {h}x{w} (+{pad})")));
        }
        Ok(Self {
            n,
            h,
            w,
            oh: (h + 2 * pad - kh) / stride + 1,
            ow: (w + 2 * pad - kw) / stride + 1,
            kh,
            kw,
            stride,
            pad,
        })
    }

    /// Calls `f(out_pixel, in_pixel, tap)` for every in-bounds kernel tap, in
    /// a fixed order. Pixel indices are flat `b*H*W + y*W + x`.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        for b in 0..self.n {
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let op = (b * self.oh + oy) * self.ow + ox;
                    for ky in 0..self.kh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        for kx in 0..self.kw {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= self.w as isize {
                                continue;
                            }
                            let ip = (b * self.h + iy as usize) * self.w + ix as usize;
                            f(op, ip, ky * self.kw + kx);
                        }
                    }
                }
            }
        }
    }
}

fn check_bias(g: &Graph, b: Option<Var>, c: usize) -> Result<()> {
    if let Some(b) = b {
        if g.shape(b) != [c] {
            return Err(Error::param(format!("bias shape {:?} for {c} channels", g.shape(b))));
        }
    }
    Ok(())
}

impl Graph {
    /// 2-D convolution of `x: [N,H,W,Cin]` with `w: [kh,kw,Cin,Cout]`, zero
    /// padding `pad` on every side.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (n, h, wd, cin) = nhwc(self.shape(x), "conv2d input")?;
        let (kh, kw, kcin, cout) = nhwc(self.shape(w), "conv2d kernel")?;
        if kcin != cin {
            return Err(Error::param(format!("conv2d: kernel expects {kcin} channels, input has {cin}")));
        }
        check_bias(self, b, cout)?;
        let geo = Geom::new(n, h, wd, kh, kw, stride, pad)?;
        let (xv, wv) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![0.0; n * geo.oh * geo.ow * cout];
        if let Some(b) = b {
            let bv = self.value(b).data();
            out.chunks_mut(cout).for_each(|r| r.copy_from_slice(bv));
        }
        geo.for_each_tap(|op, ip, tap| {
            let orow = &mut out[op * cout..(op + 1) * cout];
            for ci in 0..cin {
                let xval = xv[ip * cin + ci];
                let wrow = &wv[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
                orow.iter_mut().zip(wrow).for_each(|(o, w)| *o += xval * w);
            }
        });
        let out = Tensor::new(&[n, geo.oh, geo.ow, cout], out)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        let has_bias = b.is_some();
        Ok(self.push(
            out,
            &parents,
            Box::new(move |g, _, ins| {
                let (xv, wv) = (ins[0].data(), ins[1].data());
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                geo.for_each_tap(|op, ip, tap| {
                    let grow = &g[op * cout..(op + 1) * cout];
                    for ci in 0..cin {
                        let wi = (tap * cin + ci) * cout;
                        let wrow = &wv[wi..wi + cout];
                        gx[ip * cin + ci] += wrow.iter().zip(grow).map(|(w, g)| w * g).sum::<f64>();
                        let xval = xv[ip * cin + ci];
                        gw[wi..wi + cout].iter_mut().zip(grow).for_each(|(a, g)| *a += xval * g);
                    }
                });
                let mut res = vec![Some(gx), Some(gw)];
                if has_bias {
                    let mut gb = vec![0.0; cout];
                    g.chunks(cout).for_each(|r| gb.iter_mut().zip(r).for_each(|(a, v)| *a += v));
                    res.push(Some(gb));
                }
                res
            }),
        ))
    }

    /// Per-channel convolution of `x: [N,H,W,C]` with `w: [k,k,C]`.
    pub fn depthwise_conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (n, h, wd, c) = nhwc(self.shape(x), "depthwise_conv2d input")?;
        let (kh, kw, kc) = match *self.shape(w) {
            [kh, kw, kc] => (kh, kw, kc),
            ref s => return Err(Error::param(format!("depthwise kernel must be [kh,kw,C], got {s:?}"))),
        };
        if kc != c {
            return Err(Error::param(format!("depthwise: kernel has {kc} channels, input {c}")));
        }
        check_bias(self, b, c)?;
        let geo = Geom::new(n, h, wd, kh, kw, stride, pad)?;
        let (xv, wv) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![0.0; n * geo.oh * geo.ow * c];
        if let Some(b) = b {
            let bv = self.value(b).data();
            out.chunks_mut(c).for_each(|r| r.copy_from_slice(bv));
        }
        geo.for_each_tap(|op, ip, tap| {
            let orow = &mut out[op * c..(op + 1) * c];
            let xrow = &xv[ip * c..(ip + 1) * c];
            let wrow = &wv[tap * c..(tap + 1) * c];
            for k in 0..c {
                orow[k] += xrow[k] * wrow[k];
            }
        });
        let out = Tensor::new(&[n, geo.oh, geo.ow, c], out)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        let has_bias = b.is_some();
        Ok(self.push(
            out,
            &parents,
            Box::new(move |g, _, ins| {
                let (xv, wv) = (ins[0].data(), ins[1].data());
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                geo.for_each_tap(|op, ip, tap| {
                    for k in 0..c {
                        let gv = g[op * c + k];
                        gx[ip * c + k] += wv[tap * c + k] * gv;
                        gw[tap * c + k] += xv[ip * c + k] * gv;
                    }
                });
                let mut res = vec![Some(gx), Some(gw)];
                if has_bias {
                    let mut gb = vec![0.0; c];
                    g.chunks(c).for_each(|r| gb.iter_mut().zip(r).for_each(|(a, v)| *a += v));
                    res.push(Some(gb));
                }
                res
            }),
        ))
    }
}
