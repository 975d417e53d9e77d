use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// Metrics of one confusion; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn metrics(&self) -> Result<Metrics> {
        let total = self.total();
        if total == 0 {
            return Err(Error::param("metrics of an empty confusion"));
        }
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        Ok(Metrics {
            accuracy: (self.tp + self.tn) as f64 / total as f64,
            precision: ratio(self.tp, self.tp + self.fp),
            recall: ratio(self.tp, self.tp + self.fn_),
        })
    }
}

/// Per-class one-vs-rest confusions of `preds` against `labels`.
pub fn confusions(preds: &[usize], labels: &[usize], classes: usize) -> Result<Vec<Confusion>> {
    if preds.len() != labels.len() {
        return Err(Error::param(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if let Some(bad) = preds.iter().chain(labels).find(|c| **c >= classes) {
        return Err(Error::param(format!("class {bad} outside {classes}")));
    }
    let mut out = vec![Confusion::default(); classes];
    for (k, conf) in out.iter_mut().enumerate() {
        for (&p, &l) in preds.iter().zip(labels) {
            match (p == k, l == k) {
                (true, true) => conf.tp += 1,
                (true, false) => conf.fp += 1,
                (false, true) => conf.fn_ += 1,
                (false, false) => conf.tn += 1,
            }
        }
    }
    Ok(out)
}

/// Recounts the one-vs-rest confusions from a full class-by-class matrix and
/// checks them against [`confusions`].
pub fn audit_confusions(preds: &[usize], labels: &[usize], classes: usize) -> Result<()> {
    let fast = confusions(preds, labels, classes)?;
    let mut m = vec![vec![0u64; classes]; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    let n = preds.len() as u64;
    for (k, c) in fast.iter().enumerate() {
        let tp = m[k][k];
        let fn_ = m[k].iter().sum::<u64>() - tp;
        let fp = (0..classes).map(|l| m[l][k]).sum::<u64>() - tp;
        let want = Confusion {
            tp,
            tn: n - tp - fn_ - fp,
            fp,
            fn_,
        };
        if *c != want || c.total() != n {
            return Err(Error::diag(format!("confusion recount mismatch for class {k}: {c:?} vs {want:?}")));
        }
    }
    Ok(())
}

/// Macro averages over classes. Classes with an undefined precision or
/// recall are left out of that average and counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub undefined_precision: usize,
    pub undefined_recall: usize,
    /// Fraction of samples whose predicted class is the label.
    pub top1: f64,
}

pub fn macro_metrics(preds: &[usize], labels: &[usize], classes: usize) -> Result<MacroMetrics> {
    if preds.is_empty() {
        return Err(Error::param("metrics of an empty prediction set"));
    }
    let per: Vec<Metrics> = confusions(preds, labels, classes)?
        .iter()
        .map(Confusion::metrics)
        .collect::<Result<_>>()?;
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(MacroMetrics {
        accuracy: mean(&mut per.iter().map(|m| m.accuracy)),
        precision: mean(&mut per.iter().filter_map(|m| m.precision)),
        recall: mean(&mut per.iter().filter_map(|m| m.recall)),
        undefined_precision: per.iter().filter(|m| m.precision.is_none()).count(),
        undefined_recall: per.iter().filter(|m| m.recall.is_none()).count(),
        top1: hits as f64 / preds.len() as f64,
    })
}

/// Fraction of OOD samples whose score falls below `tau`.
pub fn oodd_accuracy(ood_scores: &[f64], tau: f64) -> Result<f64> {
    if ood_scores.is_empty() {
        return Err(Error::diag("OOD detection accuracy without OOD samples"));
    }
    Ok(ood_scores.iter().filter(|s| **s < tau).count() as f64 / ood_scores.len() as f64)
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that an in-distribution score exceeds an OOD score, ties
/// counted half (Mann-Whitney U / (n_id n_ood)).
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    if id_scores.is_empty() || ood_scores.is_empty() {
        return Err(Error::diag("AUROC needs both populations"));
    }
    let all: Vec<f64> = id_scores.iter().chain(ood_scores).copied().collect();
    if all.iter().any(|s| s.is_nan()) {
        return Err(Error::diag("AUROC of NaN scores"));
    }
    let ranks = average_ranks(&all);
    let n_id = id_scores.len() as f64;
    let r_id: f64 = ranks[..id_scores.len()].iter().sum();
    Ok((r_id - n_id * (n_id + 1.0) / 2.0) / (n_id * ood_scores.len() as f64))
}

/// Spearman rank correlation, ties by average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::param("rank correlation needs two equally long series of length >= 2"));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::diag("rank correlation of a constant series"));
    }
    Ok(cov / (vx * vy).sqrt())
}
