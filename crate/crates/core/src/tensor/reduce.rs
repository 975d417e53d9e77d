use super::{nhwc, Graph, Tensor, Var};
use crate::{Error, Result};

impl Graph {
    /// Mean over H and W: `[N,H,W,C] -> [N,1,1,C]`.
    pub fn gap(&mut self, x: Var) -> Result<Var> {
        let (n, h, w, c) = nhwc(self.shape(x), "gap")?;
        let hw = h * w;
        if hw == 0 || c == 0 {
            return Err(Error::param("gap over an empty axis"));
        }
        let src = self.value(x).data();
        let mut v = vec![0.0; n * c];
        for b in 0..n {
            for p in 0..hw {
                let row = &src[(b * hw + p) * c..(b * hw + p + 1) * c];
                v[b * c..(b + 1) * c].iter_mut().zip(row).for_each(|(a, r)| *a += r);
            }
        }
        v.iter_mut().for_each(|a| *a /= hw as f64);
        let out = Tensor::new(&[n, 1, 1, c], v)?;
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; n * hw * c];
                for b in 0..n {
                    for p in 0..hw {
                        for k in 0..c {
                            gx[(b * hw + p) * c + k] = g[b * c + k] / hw as f64;
                        }
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Max over H and W: `[N,H,W,C] -> [N,1,1,C]`. The gradient goes to the
    /// first maximal position.
    pub fn gmp(&mut self, x: Var) -> Result<Var> {
        let (n, h, w, c) = nhwc(self.shape(x), "gmp")?;
        let hw = h * w;
        if hw == 0 || c == 0 {
            return Err(Error::param("gmp over an empty axis"));
        }
        let src = self.value(x).data();
        let mut v = vec![f64::NEG_INFINITY; n * c];
        let mut arg = vec![0usize; n * c];
        for b in 0..n {
            for p in 0..hw {
                for k in 0..c {
                    let i = (b * hw + p) * c + k;
                    if src[i] > v[b * c + k] {
                        v[b * c + k] = src[i];
                        arg[b * c + k] = i;
                    }
                }
            }
        }
        let out = Tensor::new(&[n, 1, 1, c], v)?;
        let len = src.len();
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; len];
                for (j, &i) in arg.iter().enumerate() {
                    gx[i] += g[j];
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Mean over channels: `[N,H,W,C] -> [N,H,W,1]`.
    pub fn gap_spatial(&mut self, x: Var) -> Result<Var> {
        let (n, h, w, c) = nhwc(self.shape(x), "gap_spatial")?;
        if c == 0 {
            return Err(Error::param("gap_spatial over an empty axis"));
        }
        let v: Vec<f64> = self.value(x).data().chunks(c).map(|r| r.iter().sum::<f64>() / c as f64).collect();
        let out = Tensor::new(&[n, h, w, 1], v)?;
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, _, _| vec![Some(g.iter().flat_map(|g| std::iter::repeat_n(g / c as f64, c)).collect())]),
        ))
    }

    /// Max over channels: `[N,H,W,C] -> [N,H,W,1]`.
    pub fn gmp_spatial(&mut self, x: Var) -> Result<Var> {
        let (n, h, w, c) = nhwc(self.shape(x), "gmp_spatial")?;
        if c == 0 {
            return Err(Error::param("gmp_spatial over an empty axis"));
        }
        let mut arg = Vec::with_capacity(n * h * w);
        let v: Vec<f64> = self
            .value(x)
            .data()
            .chunks(c)
            .map(|r| {
                let mut best = 0;
                for (k, val) in r.iter().enumerate() {
                    if *val > r[best] {
                        best = k;
                    }
                }
                arg.push(best);
                r[best]
            })
            .collect();
        let out = Tensor::new(&[n, h, w, 1], v)?;
        Ok(self.push(
            out,
            &[x],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; g.len() * c];
                for (p, (&a, gv)) in arg.iter().zip(g).enumerate() {
                    gx[p * c + a] = *gv;
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Sum of all entries, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().sum();
        let len = self.value(x).len();
        self.push(Tensor::scalar(s), &[x], Box::new(move |g, _, _| vec![Some(vec![g[0]; len])]))
    }

    /// `sum(x * w)` for a fixed weight tensor; turns any op output into a
    /// scalar with a non-trivial gradient.
    pub fn weighted_sum(&mut self, x: Var, w: &Tensor) -> Result<Var> {
        if self.shape(x) != w.shape() {
            return Err(Error::param(format!(
                "weighted_sum: shapes {:?} and {:?} differ",
                self.shape(x),
                w.shape()
            )));
        }
        let s: f64 = self.value(x).data().iter().zip(w.data()).map(|(a, b)| a * b).sum();
        let w = w.data().to_vec();
        Ok(self.push(
            Tensor::scalar(s),
            &[x],
            Box::new(move |g, _, _| vec![Some(w.iter().map(|w| w * g[0]).collect())]),
        ))
    }
}
