use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::metrics::{audit_confusions, auroc, macro_metrics, oodd_accuracy, MacroMetrics};
use crate::exec::Exec;
use crate::fusion_net::{msp, predicted_class, train, Arch, FusionNet, NetConfig, Sample, TrainConfig, TrainLog};
use crate::signal_synth::seeded_rng;
use crate::{Error, Result};

/// Model variants compared against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationId {
    IqCnn,
    ZcCnn,
    TfiOnly,
    Concat,
    FusionChannel,
    FusionSpatial,
    FusionProposed,
}

impl AblationId {
    pub const ALL: [AblationId; 7] = [
        AblationId::IqCnn,
        AblationId::ZcCnn,
        AblationId::TfiOnly,
        AblationId::Concat,
        AblationId::FusionChannel,
        AblationId::FusionSpatial,
        AblationId::FusionProposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationId::IqCnn => "iq_cnn",
            AblationId::ZcCnn => "zc_cnn",
            AblationId::TfiOnly => "tfi_only",
            AblationId::Concat => "concat",
            AblationId::FusionChannel => "fusion_channel",
            AblationId::FusionSpatial => "fusion_spatial",
            AblationId::FusionProposed => "fusion_proposed",
        }
    }

    /// Desk network for this variant.
    pub fn net_config(self, class_count: usize, zc_rows: usize) -> NetConfig {
        let arch = match self {
            AblationId::IqCnn => Arch::IqCnn,
            AblationId::ZcCnn => Arch::ZcCnn,
            AblationId::TfiOnly => Arch::TfiOnly,
            AblationId::Concat => Arch::Concat,
            _ => Arch::Fusion,
        };
        let mut cfg = NetConfig::desk(arch, class_count, zc_rows);
        cfg.afw_spatial = matches!(self, AblationId::FusionSpatial | AblationId::FusionProposed);
        cfg.afw_channel = matches!(self, AblationId::FusionChannel | AblationId::FusionProposed);
        cfg
    }
}

impl fmt::Display for AblationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AblationId::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::param(format!("unknown ablation '{s}'")))
    }
}

/// Recognition and OOD-detection metrics of one model on one test draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rid: MacroMetrics,
    pub oodd_acc: f64,
    pub auroc: f64,
    pub tau: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

/// Evaluates `net` on in-distribution `test` samples and `ood` samples at
/// the model's calibrated threshold.
pub fn evaluate(net: &FusionNet, test: &[Sample], ood: &[Sample], batch: usize, exec: Exec) -> Result<EvalReport> {
    let tau = net
        .tau
        .ok_or_else(|| Error::diag("model has no calibrated OOD threshold"))?;
    if test.is_empty() {
        return Err(Error::diag("evaluation without in-distribution samples"));
    }
    let classes = net.config.class_count;
    let id_probs = net.predict(test, batch, exec)?;
    let ood_probs = net.predict(ood, batch, exec)?;
    let preds: Vec<usize> = id_probs.iter().map(|p| predicted_class(p)).collect();
    let labels: Vec<usize> = test.iter().map(|s| s.label).collect();
    audit_confusions(&preds, &labels, classes)?;
    let rid = macro_metrics(&preds, &labels, classes)?;
    let id_scores: Vec<f64> = id_probs.iter().map(|p| msp(p)).collect();
    let ood_scores: Vec<f64> = ood_probs.iter().map(|p| msp(p)).collect();
    Ok(EvalReport {
        rid,
        oodd_acc: oodd_accuracy(&ood_scores, tau)?,
        auroc: auroc(&id_scores, &ood_scores)?,
        tau,
        n_id: test.len(),
        n_ood: ood.len(),
    })
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub id: AblationId,
    pub seed: u64,
    pub net: FusionNet,
    pub log: TrainLog,
    pub report: EvalReport,
}

/// Trains the variant `id` on the corpus and evaluates it on the held-out
/// test and OOD draws. Initialization and batch order follow `seed`.
pub fn run_ablation(
    id: AblationId,
    corpus: &Corpus,
    class_count: usize,
    zc_rows: usize,
    train_cfg: &TrainConfig,
    seed: u64,
    exec: Exec,
) -> Result<AblationRun> {
    let cfg = id.net_config(class_count, zc_rows);
    let mut rng = seeded_rng(seed);
    let mut net = FusionNet::new(cfg, &mut rng)?;
    let log = train(&mut net, &corpus.train, &corpus.val, train_cfg, &mut rng)?;
    let report = evaluate(&net, &corpus.test, &corpus.ood, train_cfg.batch_size, exec)?;
    Ok(AblationRun {
        id,
        seed,
        net,
        log,
        report,
    })
}
