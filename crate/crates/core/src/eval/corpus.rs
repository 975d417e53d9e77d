use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::features::{iq_image, Featurizer};
use crate::fusion_net::Sample;
use crate::signal_synth::{
    seeded_rng, synth_record, ChannelConfig, Distance, IqRecord, Los, ProtocolProfile, RecordMeta,
};
use crate::{Error, Result};

/// Side of the raw-IQ image for the IQ baseline.
pub const IQ_IMAGE_SIDE: usize = 32;

/// How many records of which kind to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub snrs_db: Vec<f64>,
    /// Per in-distribution class and SNR.
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    /// Per OOD class and SNR.
    pub ood_per_class: usize,
    pub record_len: usize,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snrs_db.is_empty() {
            return Err(Error::config("corpus needs at least one SNR"));
        }
        if self.train_per_class == 0 || self.val_per_class == 0 {
            return Err(Error::config("corpus needs training and validation records"));
        }
        if self.record_len == 0 {
            return Err(Error::config("record length must be positive"));
        }
        Ok(())
    }
}

/// Featurized splits. Labels of `ood` samples are their profile class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    pub ood: Vec<Sample>,
}

/// Where a record comes from; two records with equal keys are identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordKey {
    pub seed: u64,
    pub split: u64,
    pub class_id: u32,
    pub condition: u64,
    pub index: u64,
}

impl RecordKey {
    /// Independent generator seed from the key (SplitMix64 finalizer over
    /// the fields).
    pub fn record_seed(&self) -> u64 {
        let mut h = 0x9E37_79B9_7F4A_7C15u64;
        for v in [self.seed, self.split, self.class_id as u64, self.condition, self.index] {
            h ^= v;
            h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = h;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            h = z ^ (z >> 31);
        }
        h
    }
}

/// Link condition applied to every record of a draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub snr_db: f64,
    pub meta: RecordMeta,
    pub record_len: usize,
}

impl Condition {
    pub fn awgn(snr_db: f64, record_len: usize) -> Self {
        Self {
            snr_db,
            meta: RecordMeta {
                distance: Distance::D00,
                los: Los::S00,
            },
            record_len,
        }
    }
}

pub fn synth_keyed(profile: &ProtocolProfile, cond: &Condition, key: RecordKey) -> Result<IqRecord> {
    let seed = key.record_seed();
    let mut rng = seeded_rng(seed);
    let ch = ChannelConfig::for_link(cond.snr_db, cond.meta, seed);
    let mut rec = synth_record(profile, &ch, cond.record_len, &mut rng)?;
    rec.meta = cond.meta;
    Ok(rec)
}

/// Synthesizes and featurizes one record.
pub fn keyed_sample(
    profile: &ProtocolProfile,
    featurizer: &Featurizer,
    cond: &Condition,
    key: RecordKey,
) -> Result<Sample> {
    let rec = synth_keyed(profile, cond, key)?;
    let mut rng = seeded_rng(key.record_seed() ^ 0x5A5A_5A5A);
    let f = featurizer.featurize(&rec, &mut rng, Exec::Sequential)?;
    Ok(Sample {
        tfi: f.tfi.values,
        zc: f.zc.values,
        iq: iq_image(&rec, IQ_IMAGE_SIDE, IQ_IMAGE_SIDE)?,
        label: profile.class_id as usize,
    })
}

/// `count` records for each class under one condition.
#[allow(clippy::too_many_arguments)]
pub fn draw(
    profiles: &[ProtocolProfile],
    classes: &[u32],
    featurizer: &Featurizer,
    cond: &Condition,
    condition_tag: u64,
    split: u64,
    count: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Sample>> {
    let mut jobs = Vec::with_capacity(classes.len() * count);
    for &c in classes {
        let p = profiles
            .iter()
            .find(|p| p.class_id == c)
            .ok_or_else(|| Error::config(format!("no profile for class {c}")))?;
        for i in 0..count {
            jobs.push((
                p,
                RecordKey {
                    seed,
                    split,
                    class_id: c,
                    condition: condition_tag,
                    index: i as u64,
                },
            ));
        }
    }
    exec.map(&jobs, |(p, key)| keyed_sample(p, featurizer, cond, *key))
        .into_iter()
        .collect()
}

pub const SPLIT_TRAIN: u64 = 0;
pub const SPLIT_VAL: u64 = 1;
pub const SPLIT_TEST: u64 = 2;
pub const SPLIT_OOD: u64 = 3;

/// Tag that keeps draws at different SNRs apart.
pub fn snr_tag(snr_db: f64) -> u64 {
    snr_db.to_bits()
}

/// Train/validation/test draws of the in-distribution classes and a test
/// draw of the OOD classes, at every SNR of `spec`.
pub fn build_corpus(
    profiles: &[ProtocolProfile],
    id_classes: &[u32],
    ood_classes: &[u32],
    featurizer: &Featurizer,
    spec: &CorpusSpec,
    seed: u64,
    exec: Exec,
) -> Result<Corpus> {
    spec.validate()?;
    let mut c = Corpus {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        ood: Vec::new(),
    };
    for &snr in &spec.snrs_db {
        let cond = Condition::awgn(snr, spec.record_len);
        let tag = snr_tag(snr);
        let d = |classes: &[u32], split, n| draw(profiles, classes, featurizer, &cond, tag, split, n, seed, exec);
        c.train.extend(d(id_classes, SPLIT_TRAIN, spec.train_per_class)?);
        c.val.extend(d(id_classes, SPLIT_VAL, spec.val_per_class)?);
        c.test.extend(d(id_classes, SPLIT_TEST, spec.test_per_class)?);
        c.ood.extend(d(ood_classes, SPLIT_OOD, spec.ood_per_class)?);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_seeds_differ_per_field() {
        let k = RecordKey {
            seed: 1,
            split: 0,
            class_id: 2,
            condition: 3,
            index: 4,
        };
        let mut seen = std::collections::BTreeSet::new();
        seen.insert(k.record_seed());
        for f in 0..5 {
            let mut m = k;
            match f {
                0 => m.seed += 1,
                1 => m.split += 1,
                2 => m.class_id += 1,
                3 => m.condition += 1,
                _ => m.index += 1,
            }
            assert!(seen.insert(m.record_seed()));
        }
    }
}
