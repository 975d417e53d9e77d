use std::fs;
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::afw::ClassStats;
use super::{FusionNet, NetConfig};
use crate::signal_synth::ZcRoot;
use crate::tensor::checkpoint::{load_params, save_params};
use crate::{Error, Result};

pub const MODEL_FILE: &str = "model.toml";
pub const PARAMS_FILE: &str = "params.tns";
pub const INDEX_FILE: &str = "params.idx";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    channels: usize,
    spatial: usize,
    depth: usize,
    alpha: f64,
    tau: Option<f64>,
    afw_momentum: f64,
    class_count: usize,
    /// Candidate roots as `[root, length]`, in feature-row order.
    candidate_roots: Vec<[u32; 2]>,
    params_index: String,
    net: NetConfig,
    stats: Option<ClassStats>,
}

/// Writes `model.toml`, `params.tns` and `params.idx` into `dir`.
pub fn save_model(net: &FusionNet, candidates: &[ZcRoot], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_params(&net.params, &dir.join(PARAMS_FILE), &dir.join(INDEX_FILE))?;
    let c = &net.config;
    let file = ModelFile {
        channels: c.channels,
        spatial: c.spatial,
        depth: c.depth,
        alpha: net.alpha().unwrap_or(c.alpha),
        tau: net.tau,
        afw_momentum: c.afw_momentum,
        class_count: c.class_count,
        candidate_roots: candidates.iter().map(|r| [r.root, r.len]).collect(),
        params_index: INDEX_FILE.into(),
        net: c.clone(),
        stats: net.stats.clone(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::format(format!("model file: {e}")))?;
    let path = dir.join(MODEL_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Reads a model written by [`save_model`] with its candidate roots.
pub fn load_model(dir: &Path) -> Result<(FusionNet, Vec<ZcRoot>)> {
    let path = dir.join(MODEL_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: ModelFile = toml::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let c = &file.net;
    if (file.channels, file.spatial, file.depth, file.class_count) != (c.channels, c.spatial, c.depth, c.class_count)
        || file.afw_momentum != c.afw_momentum
    {
        return Err(Error::config(format!("{}: summary keys disagree with [net]", path.display())));
    }
    if let Some(st) = &file.stats {
        if st.class_count != c.class_count {
            return Err(Error::config(format!(
                "statistics for {} classes, model has {}",
                st.class_count, c.class_count
            )));
        }
    }
    // Values are overwritten by the checkpoint; the seed only shapes the store.
    let mut net = FusionNet::new(file.net.clone(), &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))?;
    load_params(&mut net.params, &dir.join(&file.params_index))?;
    net.stats = file.stats;
    net.tau = file.tau;
    Ok((net, file.candidate_roots.iter().map(|[r, l]| ZcRoot::new(*r, *l)).collect()))
}
