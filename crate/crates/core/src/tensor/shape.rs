use super::{nhwc, Graph, Tensor, Var};
use crate::{Error, Result};

/// Destination channel of source channel `c` under a shuffle with `groups`.
pub fn shuffle_target(c: usize, channels: usize, groups: usize) -> usize {
    (c % groups) * (channels / groups) + c / groups
}

impl Graph {
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        Ok(self.push(out, &[x], Box::new(|g, _, _| vec![Some(g.to_vec())])))
    }

    /// Concatenation along the last axis. All inputs share the leading axes.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| Error::param("concat of nothing"))?;
        let lead = self.shape(*first).split_last().map(|(_, l)| l.to_vec()).unwrap_or_default();
        let mut widths = Vec::with_capacity(xs.len());
        for x in xs {
            let s = self.shape(*x);
            let (w, l) = s.split_last().ok_or_else(|| Error::param("concat of a rank-0 tensor"))?;
            if l != lead.as_slice() {
                return Err(Error::param(format!("concat: leading axes {l:?} differ from {lead:?}")));
            }
            widths.push(*w);
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut v = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (x, w) in xs.iter().zip(&widths) {
                v.extend_from_slice(&self.value(*x).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let out = Tensor::new(&shape, v)?;
        Ok(self.push(
            out,
            xs,
            Box::new(move |g, _, _| {
                let mut parts: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(rows * w)).collect();
                for row in g.chunks(total) {
                    let mut off = 0;
                    for (p, w) in parts.iter_mut().zip(&widths) {
                        p.extend_from_slice(&row[off..off + w]);
                        off += w;
                    }
                }
                parts.into_iter().map(Some).collect()
            }),
        ))
    }

    /// Slice `[start, start + len)` of the last axis.
    pub fn split(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (&total, lead) = shape.split_last().ok_or_else(|| Error::param("split of a rank-0 tensor"))?;
        if start + len > total || len == 0 {
            return Err(Error::param(format!("split [{start}, {}) outside axis of {total}", start + len)));
        }
        let v: Vec<f64> = self
            .value(x)
            .data()
            .chunks(total)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let mut oshape = lead.to_vec();
        oshape.push(len);
        let out = Tensor::new(&oshape, v)?;
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, _, ins| {
                let mut gx = vec![0.0; ins[0].len()];
                for (dst, src) in gx.chunks_mut(total).zip(g.chunks(len)) {
                    dst[start..start + len].copy_from_slice(src);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Channel shuffle on the last axis: source channel `c` moves to
    /// `(c mod groups) * (C / groups) + c div groups`.
    pub fn channel_shuffle(&mut self, x: Var, groups: usize) -> Result<Var> {
        let c = *self.shape(x).last().ok_or_else(|| Error::param("shuffle of a rank-0 tensor"))?;
        if groups == 0 || c % groups != 0 {
            return Err(Error::param(format!("{c} channels not divisible into {groups} groups")));
        }
        let perm: Vec<usize> = (0..c).map(|i| shuffle_target(i, c, groups)).collect();
        let mut v = vec![0.0; self.value(x).len()];
        for (dst, src) in v.chunks_mut(c).zip(self.value(x).data().chunks(c)) {
            for (i, s) in src.iter().enumerate() {
                dst[perm[i]] = *s;
            }
        }
        let out = Tensor::new(self.shape(x), v)?;
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; g.len()];
                for (dst, src) in gx.chunks_mut(c).zip(g.chunks(c)) {
                    for (i, d) in dst.iter_mut().enumerate() {
                        *d = src[perm[i]];
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Nearest-neighbour resize of an NHWC tensor to `oh x ow`.
    pub fn upsample_nn(&mut self, x: Var, oh: usize, ow: usize) -> Result<Var> {
        let (n, h, w, c) = nhwc(self.shape(x), "upsample_nn")?;
        if oh == 0 || ow == 0 || h == 0 || w == 0 {
            return Err(Error::param("upsample_nn with an empty spatial axis"));
        }
        let map: Vec<usize> = (0..oh * ow)
            .map(|p| {
                let (y, xx) = (p / ow, p % ow);
                (y * h / oh) * w + xx * w / ow
            })
            .collect();
        let src = self.value(x).data();
        let mut v = Vec::with_capacity(n * oh * ow * c);
        for b in 0..n {
            for &m in &map {
                let off = (b * h * w + m) * c;
                v.extend_from_slice(&src[off..off + c]);
            }
        }
        let out = Tensor::new(&[n, oh, ow, c], v)?;
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; n * h * w * c];
                for b in 0..n {
                    for (p, &m) in map.iter().enumerate() {
                        let dst = (b * h * w + m) * c;
                        let s = (b * oh * ow + p) * c;
                        for k in 0..c {
                            gx[dst + k] += g[s + k];
                        }
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Mode;

    fn chans(c: usize) -> Tensor {
        Tensor::from_fn(&[1, 1, 1, c], |i| i as f64)
    }

    #[test]
    fn shuffle_four_channels_two_groups() {
        let mut g = Graph::new(Mode::Eval);
        let x = g.constant(chans(4));
        let y = g.channel_shuffle(x, 2).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 2.0, 1.0, 3.0]);
        let y1 = g.channel_shuffle(x, 1).unwrap();
        assert_eq!(g.value(y1).data(), g.value(x).data());
    }

    #[test]
    fn shuffle_inverse_pair() {
        let mut g = Graph::new(Mode::Eval);
        let x = g.constant(chans(12));
        let a = g.channel_shuffle(x, 3).unwrap();
        let b = g.channel_shuffle(a, 4).unwrap();
        assert_eq!(g.value(b).data(), g.value(x).data());
        assert!(g.channel_shuffle(x, 5).is_err());
    }

    #[test]
    fn concat_split_round_trip() {
        let mut g = Graph::new(Mode::Eval);
        let a = g.constant(Tensor::from_fn(&[2, 2, 1, 3], |i| i as f64));
        let b = g.constant(Tensor::from_fn(&[2, 2, 1, 2], |i| 100.0 + i as f64));
        let c = g.concat(&[a, b]).unwrap();
        assert_eq!(g.shape(c), &[2, 2, 1, 5]);
        let a2 = g.split(c, 0, 3).unwrap();
        let b2 = g.split(c, 3, 2).unwrap();
        assert_eq!(g.value(a2), g.value(a));
        assert_eq!(g.value(b2), g.value(b));
    }

    #[test]
    fn upsample_three_to_four() {
        let mut g = Graph::new(Mode::Eval);
        let x = g.constant(Tensor::from_fn(&[1, 3, 3, 1], |i| i as f64));
        let y = g.upsample_nn(x, 4, 4).unwrap();
        let v = g.value(y).data();
        assert_eq!(&v[0..4], &[0.0, 0.0, 1.0, 2.0]);
        assert_eq!(&v[12..16], &[6.0, 6.0, 7.0, 8.0]);
    }
}
