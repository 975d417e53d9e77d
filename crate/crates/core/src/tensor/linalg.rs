use super::{Graph, Tensor, Var};
use crate::{Error, Result};

fn batched(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    match *shape {
        [m, k] => Ok((1, m, k)),
        [b, m, k] => Ok((b, m, k)),
        _ => Err(Error::param(format!("{what}: expected rank 2 or 3, got {shape:?}"))),
    }
}

/// `c[m,n] += a[m,k] * b[k,n]` (or `b[n,k]` transposed), fixed loop order.
fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, trans_b: bool) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if trans_b {
                for (j, cv) in crow.iter_mut().enumerate() {
                    *cv += av * b[j * k + p];
                }
            } else {
                crow.iter_mut().zip(&b[p * n..(p + 1) * n]).for_each(|(cv, bv)| *cv += av * bv);
            }
        }
    }
}

impl Graph {
    /// Batched product `A B` (or `A Bᵀ` with `trans_b`). Rank-2 operands are
    /// a batch of one.
    pub fn matmul(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (ba, m, k) = batched(self.shape(a), "matmul")?;
        let (bb, r, s) = batched(self.shape(b), "matmul")?;
        let (kb, n) = if trans_b { (s, r) } else { (r, s) };
        if ba != bb || k != kb {
            return Err(Error::param(format!(
                "matmul: {:?} x {:?}{} incompatible",
                self.shape(a),
                self.shape(b),
                if trans_b { "ᵀ" } else { "" }
            )));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut c = vec![0.0; ba * m * n];
        for t in 0..ba {
            gemm(
                &av[t * m * k..(t + 1) * m * k],
                &bv[t * k * n..(t + 1) * k * n],
                &mut c[t * m * n..(t + 1) * m * n],
                m,
                k,
                n,
                trans_b,
            );
        }
        let shape: Vec<usize> = if self.value(a).rank() == 2 { vec![m, n] } else { vec![ba, m, n] };
        let out = Tensor::new(&shape, c)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(move |g, _, ins| {
                let (av, bv) = (ins[0].data(), ins[1].data());
                let mut ga = vec![0.0; av.len()];
                let mut gb = vec![0.0; bv.len()];
                for t in 0..ba {
                    let gt = &g[t * m * n..(t + 1) * m * n];
                    let at = &av[t * m * k..(t + 1) * m * k];
                    let bt = &bv[t * k * n..(t + 1) * k * n];
                    // dA = G Bᵀ  (or G B when B was used transposed)
                    gemm(gt, bt, &mut ga[t * m * k..(t + 1) * m * k], m, n, k, !trans_b);
                    let gbt = &mut gb[t * k * n..(t + 1) * k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = at[i * k + p];
                            for j in 0..n {
                                let gij = gt[i * n + j];
                                if trans_b {
                                    gbt[j * k + p] += gij * aip;
                                } else {
                                    gbt[p * n + j] += gij * aip;
                                }
                            }
                        }
                    }
                }
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    /// `x w + b` for `x: [N,K]`, `w: [K,M]`, `b: [M]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w, false)?;
        let m = self.shape(y)[1];
        if self.shape(b) != [m] {
            return Err(Error::param(format!("linear: bias {:?} for {m} outputs", self.shape(b))));
        }
        let mut v = self.value(y).data().to_vec();
        let bv = self.value(b).data();
        v.chunks_mut(m).for_each(|r| r.iter_mut().zip(bv).for_each(|(a, b)| *a += b));
        let out = Tensor::new(self.shape(y), v)?;
        Ok(self.push(
            out,
            &[y, b],
            Box::new(move |g, _, _| {
                let mut gb = vec![0.0; m];
                g.chunks(m).for_each(|r| gb.iter_mut().zip(r).for_each(|(a, b)| *a += b));
                vec![Some(g.to_vec()), Some(gb)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Mode;

    #[test]
    fn identity_times_a() {
        let mut g = Graph::new(Mode::Eval);
        let i = g.constant(Tensor::from_fn(&[3, 3], |k| if k % 4 == 0 { 1.0 } else { 0.0 }));
        let a = g.constant(Tensor::from_fn(&[3, 2], |k| k as f64 - 2.5));
        let c = g.matmul(i, a, false).unwrap();
        assert_eq!(g.value(c), g.value(a));
    }

    #[test]
    fn transposed_product() {
        let mut g = Graph::new(Mode::Eval);
        let a = g.constant(Tensor::new(&[1, 1, 2], vec![1.0, 2.0]).unwrap());
        let b = g.constant(Tensor::new(&[1, 2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let c = g.matmul(a, b, true).unwrap();
        assert_eq!(g.value(c).data(), &[11.0, 17.0]);
        let d = g.matmul(a, b, false).unwrap();
        assert_eq!(g.value(d).data(), &[13.0, 16.0]);
        let bad = g.constant(Tensor::zeros(&[1, 3, 2]));
        assert!(g.matmul(a, bad, false).is_err());
    }
}
