//! Run manifests written next to every output, and feature directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zcfuse::features::{read_tns, write_tns, DType, TensorBlob};
use zcfuse::fusion_net::Sample;
use zcfuse::signal_synth::RecordMeta;

use crate::config::RunConfig;
use crate::error::CliError;

pub const RUN_FILE: &str = "run.toml";
pub const CONFIG_FILE: &str = "config.toml";
pub const FEATURES_FILE: &str = "features.csv";
pub const FEATURES_HEADER: &str = "tfi,zc,iq,class_id,snr_db,distance,los";

/// What produced an output: enough to replay it with the saved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config_hash: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, workers: usize, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            workers,
            config_hash: config.hash(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Writes `run` and `config` files: into `dir` as `run.toml` and
    /// `config.toml`, or beside a file output as `<file>.run.toml` and
    /// `<file>.config.toml`.
    pub fn write(&self, config: &RunConfig, target: &Path) -> Result<(), CliError> {
        let (run, cfg) = companion_paths(target);
        let text = toml::to_string(self).map_err(|e| CliError::Internal(e.to_string()))?;
        write_text(&run, &text)?;
        write_text(&cfg, &config.to_toml())
    }
}

pub fn companion_paths(target: &Path) -> (PathBuf, PathBuf) {
    if target.is_dir() {
        (target.join(RUN_FILE), target.join(CONFIG_FILE))
    } else {
        let with = |ext: &str| {
            let mut s = target.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        (with(".run.toml"), with(".config.toml"))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::user(format!("cannot create {}: {e}", path.display())))
}

/// One line of `features.csv`; paths are relative to the directory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEntry {
    pub tfi: String,
    pub zc: String,
    pub iq: String,
    pub class_id: u32,
    pub snr_db: f64,
    pub meta: RecordMeta,
}

impl FeatureEntry {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.tfi, self.zc, self.iq, self.class_id, self.snr_db, self.meta.distance, self.meta.los
        )
    }

    fn parse(line: &str) -> Result<Self, CliError> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || CliError::data(format!("bad feature line '{line}'"));
        if f.len() != 7 {
            return Err(bad());
        }
        Ok(Self {
            tfi: f[0].into(),
            zc: f[1].into(),
            iq: f[2].into(),
            class_id: f[3].parse().map_err(|_| bad())?,
            snr_db: f[4].parse().map_err(|_| bad())?,
            meta: RecordMeta {
                distance: f[5].parse().map_err(|_| bad())?,
                los: f[6].parse().map_err(|_| bad())?,
            },
        })
    }
}

pub fn write_features(dir: &Path, entries: &[FeatureEntry]) -> Result<(), CliError> {
    let mut text = String::from(FEATURES_HEADER);
    text.push('\n');
    for e in entries {
        text.push_str(&e.to_line());
        text.push('\n');
    }
    write_text(&dir.join(FEATURES_FILE), &text)
}

pub fn read_features(dir: &Path) -> Result<Vec<FeatureEntry>, CliError> {
    let path = dir.join(FEATURES_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(FEATURES_HEADER) {
        return Err(CliError::data(format!("{}: missing header", path.display())));
    }
    lines.filter(|l| !l.trim().is_empty()).map(FeatureEntry::parse).collect()
}

pub fn save_blob(path: &Path, blob: &TensorBlob) -> Result<(), CliError> {
    Ok(write_tns(path, blob, DType::F32)?)
}

/// A loaded record: the sample (label unset) and its blob dims.
pub struct Loaded {
    pub entry: FeatureEntry,
    pub sample: Sample,
    pub tfi_dims: Vec<usize>,
    pub zc_dims: Vec<usize>,
}

pub fn load_dir(dir: &Path) -> Result<Vec<Loaded>, CliError> {
    read_features(dir)?
        .into_iter()
        .map(|entry| {
            let tfi = read_tns(&dir.join(&entry.tfi))?;
            let zc = read_tns(&dir.join(&entry.zc))?;
            let iq = read_tns(&dir.join(&entry.iq))?;
            Ok(Loaded {
                tfi_dims: tfi.dims,
                zc_dims: zc.dims,
                sample: Sample {
                    tfi: tfi.data,
                    zc: zc.data,
                    iq: iq.data,
                    label: usize::MAX,
                },
                entry,
            })
        })
        .collect()
}
