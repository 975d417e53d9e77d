use super::elementwise::softmax_in_place;
use super::{Graph, Tensor, Var};
use crate::{Error, Result};

impl Graph {
    /// Mean softmax cross-entropy of `logits: [N,P]` against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (n, p) = match *self.shape(logits) {
            [n, p] => (n, p),
            ref s => return Err(Error::param(format!("cross_entropy: logits must be [N,P], got {s:?}"))),
        };
        if n == 0 || labels.len() != n {
            return Err(Error::param(format!("cross_entropy: {n} rows, {} labels", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|l| **l >= p) {
            return Err(Error::param(format!("label {bad} outside {p} classes")));
        }
        let mut probs = self.value(logits).data().to_vec();
        probs.chunks_mut(p).for_each(softmax_in_place);
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let row = &self.value(logits).data()[i * p..(i + 1) * p];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - row[l]
            })
            .sum::<f64>()
            / n as f64;
        let labels = labels.to_vec();
        Ok(self.push(
            Tensor::scalar(loss),
            &[logits],
            Box::new(move |g, _, _| {
                let mut gx = probs.clone();
                for (i, &l) in labels.iter().enumerate() {
                    gx[i * p + l] -= 1.0;
                }
                let k = g[0] / n as f64;
                gx.iter_mut().for_each(|v| *v *= k);
                vec![Some(gx)]
            }),
        ))
    }
}
