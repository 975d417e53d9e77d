//! Featurization and corpus generation with the sequential and the rayon
//! strategy. Build with `--no-default-features` to bench the sequential
//! fallback alone.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use zcfuse::eval::{build_corpus, synth_keyed, Condition, CorpusSpec, RecordKey};
use zcfuse::features::{FeatureConfig, Featurizer};
use zcfuse::signal_synth::{desk_candidates, desk_profiles, seeded_rng};
use zcfuse::Exec;

fn strategies() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn featurize(c: &mut Criterion) {
    let cand = desk_candidates();
    let fz = Featurizer::new(FeatureConfig::desk(&cand)).unwrap();
    let profiles = desk_profiles();
    let key = RecordKey {
        seed: 1,
        class_id: 1,
        split: 0,
        condition: 0,
        index: 0,
    };
    let rec = synth_keyed(&profiles[1], &Condition::awgn(10.0, 65536), key).unwrap();
    let mut g = c.benchmark_group("featurize_record");
    for (name, exec) in strategies() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fz.featurize(&rec, &mut seeded_rng(0), exec).unwrap())
        });
    }
    g.finish();
}

fn corpus(c: &mut Criterion) {
    let cand = desk_candidates();
    let fz = Featurizer::new(FeatureConfig::desk(&cand)).unwrap();
    let profiles = desk_profiles();
    let spec = CorpusSpec {
        snrs_db: vec![10.0],
        train_per_class: 2,
        val_per_class: 1,
        test_per_class: 1,
        ood_per_class: 1,
        record_len: 32768,
    };
    let mut g = c.benchmark_group("build_corpus");
    g.sample_size(10);
    for (name, exec) in strategies() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_corpus(&profiles, &[0, 1, 2, 3, 4, 5], &[6, 7], &fz, &spec, 3, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, featurize, corpus);
criterion_main!(benches);
