//! Recognition and OOD-detection metrics, the ablation ladder and the
//! robustness sweeps.

mod ablation;
mod corpus;
mod metrics;
mod sweep;

pub use ablation::{evaluate, run_ablation, AblationId, AblationRun, EvalReport};
pub use corpus::{
    build_corpus, draw, keyed_sample, snr_tag, synth_keyed, Condition, Corpus, CorpusSpec, RecordKey, IQ_IMAGE_SIDE,
    SPLIT_OOD, SPLIT_TEST, SPLIT_TRAIN, SPLIT_VAL,
};
pub use metrics::{
    audit_confusions, auroc, confusions, macro_metrics, oodd_accuracy, spearman, Confusion, MacroMetrics, Metrics,
};
pub use sweep::{results_csv, sweep, write_results, Axis, SweepGenerator, SweepRow, SweepSpec, RESULTS_HEADER};
