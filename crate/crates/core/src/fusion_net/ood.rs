use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Max-softmax-probability threshold rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodPolicy {
    pub tau: f64,
    /// Quantile of in-distribution scores the threshold was taken at.
    pub quantile: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Id(usize),
    Ood,
}

/// Largest class probability.
pub fn msp(probs: &[f64]) -> f64 {
    probs.iter().cloned().fold(0.0, f64::max)
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

pub fn predicted_class(probs: &[f64]) -> usize {
    argmax(probs)
}

/// OOD iff the max probability is below the threshold.
pub fn ood_decide(probs: &[f64], tau: f64) -> Decision {
    if msp(probs) < tau {
        Decision::Ood
    } else {
        Decision::Id(argmax(probs))
    }
}

impl OodPolicy {
    /// Threshold at the `quantile` of in-distribution scores: the score of
    /// rank `floor(q * n)` in ascending order, so at least `1 - q` of the
    /// calibration scores are accepted. Kept strictly inside (0, 1).
    pub fn calibrate(id_scores: &[f64], quantile: f64) -> Result<Self> {
        if id_scores.is_empty() {
            return Err(Error::diag("threshold calibration without scores"));
        }
        if !(0.0..1.0).contains(&quantile) {
            return Err(Error::param(format!("quantile {quantile} outside [0, 1)")));
        }
        let mut s = id_scores.to_vec();
        s.sort_by(f64::total_cmp);
        let k = ((quantile * s.len() as f64).floor() as usize).min(s.len() - 1);
        Ok(Self {
            tau: s[k].clamp(1e-12, 1.0 - 1e-12),
            quantile,
        })
    }
}
