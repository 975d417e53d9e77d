use super::{nhwc, Graph, Mode, ParamStore, Tensor, Var};
use crate::{Error, Result};

/// Weight of the old running statistic in each update.
pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

impl Graph {
    /// Batch normalization over N, H, W of an NHWC tensor, with parameters
    /// `{prefix}.gamma`, `{prefix}.beta` and buffers `{prefix}.running_mean`,
    /// `{prefix}.running_var`. Train mode normalizes with the batch
    /// statistics and queues the running-statistic update (unbiased
    /// variance); eval mode uses the running statistics.
    pub fn batch_norm(&mut self, x: Var, store: &ParamStore, prefix: &str) -> Result<Var> {
        let (n, h, w, c) = nhwc(self.shape(x), "batch_norm")?;
        let count = n * h * w;
        if count == 0 {
            return Err(Error::param("batch_norm of an empty batch"));
        }
        let gamma = self.param(store, &format!("{prefix}.gamma"))?;
        let beta = self.param(store, &format!("{prefix}.beta"))?;
        for v in [gamma, beta] {
            if self.shape(v) != [c] {
                return Err(Error::param(format!("batch_norm '{prefix}': parameter shape {:?} for {c} channels", self.shape(v))));
            }
        }
        let (mean_name, var_name) = (format!("{prefix}.running_mean"), format!("{prefix}.running_var"));
        let xv = self.value(x).data();
        let (mean, var) = match self.mode() {
            Mode::Train => {
                let mut mean = vec![0.0; c];
                xv.chunks(c).for_each(|r| mean.iter_mut().zip(r).for_each(|(m, v)| *m += v));
                mean.iter_mut().for_each(|m| *m /= count as f64);
                let mut var = vec![0.0; c];
                xv.chunks(c).for_each(|r| {
                    for k in 0..c {
                        let d = r[k] - mean[k];
                        var[k] += d * d;
                    }
                });
                let biased: Vec<f64> = var.iter().map(|v| v / count as f64).collect();
                let unbiased: Vec<f64> = var.iter().map(|v| v / (count.max(2) - 1) as f64).collect();
                let rm = store.value(&mean_name)?;
                let rv = store.value(&var_name)?;
                let new_m: Vec<f64> = rm.data().iter().zip(&mean).map(|(o, b)| BN_MOMENTUM * o + (1.0 - BN_MOMENTUM) * b).collect();
                let new_v: Vec<f64> = rv.data().iter().zip(&unbiased).map(|(o, b)| BN_MOMENTUM * o + (1.0 - BN_MOMENTUM) * b).collect();
                self.queue_stat(mean_name, Tensor::new(&[c], new_m)?);
                self.queue_stat(var_name, Tensor::new(&[c], new_v)?);
                (mean, biased)
            }
            Mode::Eval => (store.value(&mean_name)?.data().to_vec(), store.value(&var_name)?.data().to_vec()),
        };
        let inv: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let xv = self.value(x).data();
        let mut xhat = Vec::with_capacity(xv.len());
        for r in xv.chunks(c) {
            for k in 0..c {
                xhat.push((r[k] - mean[k]) * inv[k]);
            }
        }
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let y: Vec<f64> = xhat.iter().enumerate().map(|(i, v)| gv[i % c] * v + bv[i % c]).collect();
        let out = Tensor::new(self.shape(x), y)?;
        let train = self.is_train();
        Ok(self.push(
            out,
            &[x, gamma, beta],
            Box::new(move |g, _, ins| {
                let gv = ins[1].data();
                let mut gg = vec![0.0; c];
                let mut gb = vec![0.0; c];
                for (i, (gi, xh)) in g.iter().zip(&xhat).enumerate() {
                    gg[i % c] += gi * xh;
                    gb[i % c] += gi;
                }
                let gx: Vec<f64> = if train {
                    let m = count as f64;
                    g.iter()
                        .zip(&xhat)
                        .enumerate()
                        .map(|(i, (gi, xh))| {
                            let k = i % c;
                            gv[k] * inv[k] * (gi - gb[k] / m - xh * gg[k] / m)
                        })
                        .collect()
                } else {
                    g.iter().enumerate().map(|(i, gi)| gi * gv[i % c] * inv[i % c]).collect()
                };
                vec![Some(gx), Some(gg), Some(gb)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn train_mode_standardizes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        store.init_bn("bn", 3).unwrap();
        let mut g = Graph::new(Mode::Train);
        let x = g.constant(Tensor::randn(&[4, 3, 3, 3], 2.0, &mut rng));
        let y = g.batch_norm(x, &store, "bn").unwrap();
        let v = g.value(y).data();
        for k in 0..3 {
            let col: Vec<f64> = v.iter().skip(k).step_by(3).copied().collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(m.abs() < 1e-6);
            // The epsilon shrinks the variance slightly below one.
            assert!((var - 1.0).abs() < 1e-5, "{var}");
        }
    }

    #[test]
    fn eval_mode_with_unit_stats_is_identity() {
        let mut store = ParamStore::new();
        store.init_bn("bn", 2).unwrap();
        store.set_value("bn.running_var", Tensor::full(&[2], 1.0 - BN_EPS)).unwrap();
        let mut g = Graph::new(Mode::Eval);
        let x = g.constant(Tensor::from_fn(&[1, 2, 2, 2], |i| i as f64 - 3.0));
        let y = g.batch_norm(x, &store, "bn").unwrap();
        assert!(g.value(y).max_abs_diff(g.value(x)) < 1e-12);
    }

    #[test]
    fn running_stats_follow_ema() {
        let mut store = ParamStore::new();
        store.init_bn("bn", 1).unwrap();
        // Batches with means 1, 2, 3 and unbiased variances 2, 8, 18.
        let batches = [[0.0, 2.0], [0.0, 4.0], [0.0, 6.0]];
        for b in batches {
            let mut g = Graph::new(Mode::Train);
            let x = g.constant(Tensor::new(&[2, 1, 1, 1], b.to_vec()).unwrap());
            g.batch_norm(x, &store, "bn").unwrap();
            g.commit_stats(&mut store).unwrap();
        }
        // m3 = 0.9^3*0 + 0.1*(0.81*1 + 0.9*2 + 3)
        let m = store.value("bn.running_mean").unwrap().data()[0];
        assert!((m - 0.561).abs() < 1e-12, "{m}");
        // v3 = 0.729*1 + 0.1*(0.81*2 + 0.9*8 + 18)
        let v = store.value("bn.running_var").unwrap().data()[0];
        assert!((v - 3.411).abs() < 1e-12, "{v}");
    }

    #[test]
    fn empty_batch_rejected() {
        let mut store = ParamStore::new();
        store.init_bn("bn", 2).unwrap();
        let mut g = Graph::new(Mode::Train);
        let x = g.constant(Tensor::zeros(&[0, 2, 2, 2]));
        assert!(g.batch_norm(x, &store, "bn").is_err());
    }
}
