use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::afw::{ClassAccumulator, ClassStats};
use super::data::{batch_inputs, Sample};
use super::ood::{msp, predicted_class, OodPolicy};
use super::FusionNet;
use crate::exec::Exec;
use crate::tensor::{Adam, Graph, Mode, ParamStore};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without a validation-accuracy gain before stopping.
    pub patience: usize,
    /// Quantile of validation max-probabilities used as OOD threshold.
    pub ood_quantile: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            max_epochs: 40,
            batch_size: 16,
            patience: 5,
            ood_quantile: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn check_corpus(net: &FusionNet, samples: &[Sample], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::config(format!("empty {what} set")));
    }
    let p = net.config.class_count;
    if let Some(bad) = samples.iter().find(|s| s.label >= p) {
        return Err(Error::config(format!("{what} label {} outside {p} classes", bad.label)));
    }
    Ok(())
}

/// Fraction of samples whose most probable class is the label.
pub fn accuracy(probs: &[Vec<f64>], samples: &[Sample]) -> f64 {
    let hits = probs.iter().zip(samples).filter(|(p, s)| predicted_class(p) == s.label).count();
    hits as f64 / samples.len().max(1) as f64
}

/// Class statistics of the fused maps of `samples`, evaluation mode.
pub fn fused_stats(net: &FusionNet, samples: &[Sample], batch: usize) -> Result<ClassStats> {
    let cfg = &net.config;
    let d = cfg.fused_channels();
    let mut acc = ClassAccumulator::new(cfg.class_count, cfg.spatial, cfg.spatial, d);
    let refs: Vec<&Sample> = samples.iter().collect();
    for chunk in refs.chunks(batch.max(1)) {
        let inputs = batch_inputs(cfg, chunk)?;
        let mut g = Graph::new(Mode::Eval);
        let out = net.forward(&mut g, &inputs, true)?;
        let labels: Vec<usize> = chunk.iter().map(|s| s.label).collect();
        acc.add_batch(g.value(out.logits), &labels)?;
    }
    acc.finish()
}

/// Adam on the mean cross-entropy. Weighting statistics start from an
/// evaluation pass over the training set and follow an EMA of the per-epoch
/// training statistics. Training stops after `patience` epochs without a
/// validation-accuracy gain; the best epoch's parameters are kept and the OOD
/// threshold is calibrated on the validation set.
pub fn train<R: Rng + ?Sized>(
    net: &mut FusionNet,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainLog> {
    check_corpus(net, train_set, "training")?;
    check_corpus(net, val_set, "validation")?;
    let mut seen = vec![false; net.config.class_count];
    train_set.iter().for_each(|s| seen[s.label] = true);
    if seen.iter().filter(|s| **s).count() < 2 {
        return Err(Error::config("training set holds a single class"));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 || !(cfg.lr > 0.0) {
        return Err(Error::config("batch_size, max_epochs and lr must be positive"));
    }
    let afw = net.config.uses_afw();
    if afw {
        net.stats = Some(fused_stats(net, train_set, cfg.batch_size)?);
    }
    let d = net.config.fused_channels();
    let s = net.config.spatial;

    let mut adam = Adam::new(cfg.lr);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ParamStore, Option<ClassStats>)> = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(rng);
        let mut acc = ClassAccumulator::new(net.config.class_count, s, s, d);
        let mut loss_sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train_set[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
            let inputs = batch_inputs(&net.config, &batch)?;
            let mut g = Graph::new(Mode::Train);
            let out = net.forward(&mut g, &inputs, false)?;
            let loss = g.cross_entropy(out.logits, &labels)?;
            g.backward(loss)?;
            net.params.zero_grad();
            g.accumulate_grads(&mut net.params)?;
            if !net.params.grads_finite() {
                return Err(Error::diag(format!("non-finite gradient in epoch {epoch}")));
            }
            adam.step(&mut net.params);
            g.commit_stats(&mut net.params)?;
            loss_sum += g.value(loss).data()[0] * batch.len() as f64;
            if let (true, Some(f)) = (afw, out.fused) {
                acc.add_batch(g.value(f), &labels)?;
            }
        }
        if afw {
            let fresh = acc.finish()?;
            if let Some(st) = net.stats.as_mut() {
                st.blend(&fresh, net.config.afw_momentum)?;
            }
        }
        let probs = net.predict(val_set, cfg.batch_size, Exec::Sequential)?;
        let val_accuracy = accuracy(&probs, val_set);
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::diag(format!("non-finite loss in epoch {epoch}")));
        }
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|b| val_accuracy > b.0) {
            best = Some((val_accuracy, net.params.clone(), net.stats.clone()));
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, params, stats)) = best {
        net.params = params;
        net.stats = stats;
    }
    let probs = net.predict(val_set, cfg.batch_size, Exec::Sequential)?;
    let scores: Vec<f64> = probs.iter().map(|p| msp(p)).collect();
    net.tau = Some(OodPolicy::calibrate(&scores, cfg.ood_quantile)?.tau);
    Ok(log)
}
