//! The six subcommands.

use std::path::{Path, PathBuf};

use log::{info, warn};
use zcfuse::eval::{
    evaluate, results_csv, snr_tag, sweep, synth_keyed, Axis, Condition, EvalReport, RecordKey, SweepGenerator,
    SweepRow, SweepSpec, IQ_IMAGE_SIDE, SPLIT_OOD, SPLIT_TEST, SPLIT_TRAIN, SPLIT_VAL,
};
use zcfuse::features::{iq_image, TensorBlob};
use zcfuse::fusion_net::{afw_apply, load_model, save_model, train, FusionNet, NetConfig, Sample};
use zcfuse::signal_synth::{desk_profiles, read_iq, read_manifest, seeded_rng, write_iq, write_manifest, ManifestEntry};
use zcfuse::tensor::{Graph, Mode, Tensor};
use zcfuse::Exec;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::*;
use crate::pgm::{write_heatmap, Scale};

/// Settings shared by every subcommand.
pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
}

impl Ctx {
    fn exec(&self) -> Exec {
        Exec::for_workers(self.workers)
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, self.seed, self.workers, &self.config)
    }
}

pub fn split_id(name: &str) -> Result<u64, CliError> {
    Ok(match name {
        "train" => SPLIT_TRAIN,
        "val" => SPLIT_VAL,
        "test" => SPLIT_TEST,
        "ood" => SPLIT_OOD,
        _ => return Err(CliError::user(format!("unknown split '{name}' (train, val, test, ood)"))),
    })
}

/// Synthesizes `records_per_class` records per class into `out/records` and
/// writes `out/manifest.csv`.
pub fn cmd_synth(ctx: &Ctx, out: &Path, split: &str) -> Result<Vec<ManifestEntry>, CliError> {
    let s = &ctx.config.synth;
    if s.snrs_db.is_empty() {
        return Err(CliError::user("[synth] snrs_db is empty"));
    }
    let split = split_id(split)?;
    let meta = s.meta()?;
    let profiles = desk_profiles();
    let records = out.join("records");
    create_dir(&records)?;
    let mut jobs = Vec::new();
    for &c in &s.classes {
        let p = profiles
            .iter()
            .find(|p| p.class_id == c)
            .ok_or_else(|| CliError::user(format!("no protocol profile for class {c}")))?;
        for i in 0..s.records_per_class {
            jobs.push((p, i));
        }
    }
    let written: Vec<Result<ManifestEntry, CliError>> = ctx.exec().map(&jobs, |&(p, i)| {
        let snr = s.snrs_db[i % s.snrs_db.len()];
        let cond = Condition {
            snr_db: snr,
            meta,
            record_len: s.record_len,
        };
        let key = RecordKey {
            seed: ctx.seed,
            split,
            class_id: p.class_id,
            condition: snr_tag(snr),
            index: i as u64,
        };
        let rec = synth_keyed(p, &cond, key)?;
        let rel = PathBuf::from("records").join(format!("c{}_{i:05}.iq", p.class_id));
        write_iq(&out.join(&rel), &rec)?;
        Ok(ManifestEntry {
            path: rel,
            class_id: p.class_id,
            snr_db: snr,
            meta,
        })
    });
    let entries = written.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_manifest(&out.join("manifest.csv"), &entries)?;
    let mut m = ctx.manifest("synth");
    m.outputs.push("manifest.csv".into());
    m.write(&ctx.config, out)?;
    for &c in &s.classes {
        let name = &profiles.iter().find(|p| p.class_id == c).expect("checked above").name;
        println!("class {c} {name}: {}", entries.iter().filter(|e| e.class_id == c).count());
    }
    Ok(entries)
}

/// Featurizes every record of a manifest. Unreadable records are skipped
/// with a warning and make the command fail after the rest is written.
pub fn cmd_featurize(ctx: &Ctx, manifest: &Path, out: &Path) -> Result<Vec<FeatureEntry>, CliError> {
    let entries = read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let fz = ctx.config.features.featurizer()?;
    create_dir(out)?;
    let indexed: Vec<(usize, &ManifestEntry)> = entries.iter().enumerate().collect();
    let results: Vec<Result<FeatureEntry, CliError>> = ctx.exec().map(&indexed, |&(i, e)| {
        let path = base.join(&e.path);
        let rec = read_iq(&path).map_err(|err| CliError::data(format!("{}: {err}", path.display())))?;
        let key = RecordKey {
            seed: ctx.seed,
            split: u64::MAX,
            class_id: e.class_id,
            condition: snr_tag(e.snr_db),
            index: i as u64,
        };
        let mut rng = seeded_rng(key.record_seed());
        let pair = fz.featurize(&rec, &mut rng, Exec::Sequential)?;
        let iq = iq_image(&rec, IQ_IMAGE_SIDE, IQ_IMAGE_SIDE)?;
        let stem = format!("{i:05}");
        let fe = FeatureEntry {
            tfi: format!("{stem}.tfi.tns"),
            zc: format!("{stem}.zc.tns"),
            iq: format!("{stem}.iq.tns"),
            class_id: e.class_id,
            snr_db: e.snr_db,
            meta: e.meta,
        };
        save_blob(&out.join(&fe.tfi), &pair.tfi.to_blob())?;
        save_blob(&out.join(&fe.zc), &pair.zc.to_blob())?;
        let iq_blob = TensorBlob::new(vec![IQ_IMAGE_SIDE, IQ_IMAGE_SIDE, 2], iq)?;
        save_blob(&out.join(&fe.iq), &iq_blob)?;
        Ok(fe)
    });
    let mut done = Vec::new();
    let mut skipped = 0;
    for (r, e) in results.into_iter().zip(&entries) {
        match r {
            Ok(fe) => done.push(fe),
            Err(CliError::Data(msg)) => {
                warn!("skipping {}: {msg}", e.path.display());
                skipped += 1;
            }
            Err(other) => return Err(other),
        }
    }
    write_features(out, &done)?;
    let mut m = ctx.manifest("featurize");
    m.inputs.push(manifest.display().to_string());
    m.outputs.push(FEATURES_FILE.into());
    m.write(&ctx.config, out)?;
    println!("featurized {} of {} records", done.len(), entries.len());
    if skipped > 0 {
        return Err(CliError::data(format!("{skipped} records skipped")));
    }
    Ok(done)
}

fn check_shapes(cfg: &NetConfig, l: &Loaded, dir: &Path) -> Result<(), CliError> {
    let tfi = vec![cfg.image_size, cfg.image_size, cfg.tfi_channels];
    let zc = vec![cfg.zc_rows, cfg.zc_cols];
    if l.tfi_dims != tfi || l.zc_dims != zc {
        return Err(CliError::user(format!(
            "{}: features have TFI {:?} and ZC {:?}, the model expects TFI {tfi:?} and ZC {zc:?}",
            dir.join(&l.entry.tfi).display(),
            l.tfi_dims,
            l.zc_dims
        )));
    }
    Ok(())
}

/// In-distribution samples labelled by position in `id_classes`, and the
/// remaining records as OOD samples with their SNRs.
struct Split {
    id: Vec<(f64, Sample)>,
    ood: Vec<(f64, Sample)>,
}

fn load_split(dirs: &[PathBuf], cfg: &NetConfig, id_classes: &[u32]) -> Result<Split, CliError> {
    let mut s = Split {
        id: Vec::new(),
        ood: Vec::new(),
    };
    for dir in dirs {
        for mut l in load_dir(dir)? {
            check_shapes(cfg, &l, dir)?;
            match id_classes.iter().position(|c| *c == l.entry.class_id) {
                Some(label) => {
                    l.sample.label = label;
                    s.id.push((l.entry.snr_db, l.sample));
                }
                None => s.ood.push((l.entry.snr_db, l.sample)),
            }
        }
    }
    Ok(s)
}

fn id_only(dir: &Path, cfg: &NetConfig, id_classes: &[u32]) -> Result<Vec<Sample>, CliError> {
    let s = load_split(&[dir.to_path_buf()], cfg, id_classes)?;
    if !s.ood.is_empty() {
        warn!("{}: ignoring {} records outside the model's classes", dir.display(), s.ood.len());
    }
    if s.id.is_empty() {
        return Err(CliError::data(format!("{}: no records of the model's classes", dir.display())));
    }
    Ok(s.id.into_iter().map(|(_, x)| x).collect())
}

pub fn cmd_train(ctx: &Ctx, train_dir: &Path, val_dir: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = ctx.config.net_config();
    let ids = &ctx.config.model.id_classes;
    let train_set = id_only(train_dir, &cfg, ids)?;
    let val_set = id_only(val_dir, &cfg, ids)?;
    let mut rng = seeded_rng(ctx.seed);
    let mut net = FusionNet::new(cfg, &mut rng)?;
    let log = zcfuse::exec::with_workers(ctx.workers, || train(&mut net, &train_set, &val_set, &ctx.config.train, &mut rng))?;
    save_model(&net, &ctx.config.features.candidates(), out)?;
    let mut text = String::from("epoch,train_loss,val_accuracy\n");
    for e in &log.epochs {
        println!("epoch {:>3}  loss {:.5}  val acc {:.4}", e.epoch, e.train_loss, e.val_accuracy);
        text.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_accuracy));
    }
    write_text(&out.join("train_log.csv"), &text)?;
    let mut m = ctx.manifest("train");
    m.inputs.extend([train_dir.display().to_string(), val_dir.display().to_string()]);
    m.outputs.extend(["model.toml".into(), "params.tns".into(), "params.idx".into(), "train_log.csv".into()]);
    m.write(&ctx.config, out)?;
    info!("best epoch {}, early stop {}", log.best_epoch, log.stopped_early);
    Ok(())
}

/// A saved model with the configuration it was trained under.
struct Model {
    net: FusionNet,
    config: RunConfig,
}

fn open_model(dir: &Path) -> Result<Model, CliError> {
    let (net, roots) = load_model(dir)?;
    let path = dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let config = RunConfig::parse(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if config.features.candidates() != roots || config.net_config() != net.config {
        return Err(CliError::data(format!("{}: config disagrees with the saved model", dir.display())));
    }
    Ok(Model { net, config })
}

fn report_row(axis: Axis, value: String, seed: u64, report: EvalReport) -> SweepRow {
    SweepRow {
        axis,
        value,
        seed,
        report,
    }
}

/// One results row per SNR present in the in-distribution records.
pub fn cmd_eval(ctx: &Ctx, model_dir: &Path, features: &[PathBuf], out: &Path) -> Result<Vec<SweepRow>, CliError> {
    let model = open_model(model_dir)?;
    let split = load_split(features, &model.net.config, &model.config.model.id_classes)?;
    if split.id.is_empty() || split.ood.is_empty() {
        return Err(CliError::data(format!(
            "evaluation needs in-distribution and OOD records, got {} and {}",
            split.id.len(),
            split.ood.len()
        )));
    }
    let mut snrs: Vec<f64> = split.id.iter().map(|(s, _)| *s).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let mut rows = Vec::new();
    for snr in snrs {
        let at = |v: &[(f64, Sample)]| -> Vec<Sample> { v.iter().filter(|(s, _)| *s == snr).map(|(_, x)| x.clone()).collect() };
        let (id, ood) = (at(&split.id), at(&split.ood));
        if ood.is_empty() {
            return Err(CliError::data(format!("no OOD records at {snr} dB")));
        }
        let r = evaluate(&model.net, &id, &ood, ctx.config.eval.batch, ctx.exec())?;
        rows.push(report_row(Axis::Snr, snr.to_string(), ctx.seed, r));
    }
    finish_results(ctx, "eval", model_dir, features, out, &rows)?;
    Ok(rows)
}

fn finish_results(
    ctx: &Ctx,
    command: &str,
    model_dir: &Path,
    inputs: &[PathBuf],
    out: &Path,
    rows: &[SweepRow],
) -> Result<(), CliError> {
    let table = results_csv(rows);
    write_text(out, &table)?;
    print!("{table}");
    let mut m = ctx.manifest(command);
    m.inputs.push(model_dir.display().to_string());
    m.inputs.extend(inputs.iter().map(|p| p.display().to_string()));
    m.outputs.push(out.display().to_string());
    m.write(&ctx.config, out)
}

/// Fresh draws along one axis, evaluated with a saved model.
pub fn cmd_sweep(ctx: &Ctx, model_dir: &Path, out: &Path) -> Result<Vec<SweepRow>, CliError> {
    let model = open_model(model_dir)?;
    let e = &ctx.config.eval;
    let ids = &model.config.model.id_classes;
    if ids.iter().enumerate().any(|(i, c)| *c as usize != i) {
        return Err(CliError::user(format!("sweep draws need id_classes 0..n, the model has {ids:?}")));
    }
    let spec = SweepSpec {
        axis: e.axis.parse()?,
        values: e.values.clone(),
        repetitions: e.repetitions,
        seed: ctx.seed,
    };
    spec.validate()?;
    let profiles = desk_profiles();
    let fz = model.config.features.featurizer()?;
    let gen = SweepGenerator {
        profiles: &profiles,
        featurizer: &fz,
        id_classes: ids.clone(),
        ood_classes: e.ood_classes.clone(),
        id_per_class: e.id_per_class,
        ood_per_class: e.ood_per_class,
        base: Condition {
            snr_db: e.base_snr_db,
            meta: ctx.config.synth.meta()?,
            record_len: ctx.config.synth.record_len,
        },
    };
    let rows = zcfuse::exec::with_workers(ctx.workers, || sweep(&spec, &model.net, &gen, e.batch, ctx.exec()))?;
    finish_results(ctx, "sweep", model_dir, &[], out, &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ExportKind {
    Tfi,
    Zcfeature,
    SpatialWeights,
    ChannelWeights,
}

/// What to export and from where.
#[derive(Debug, Clone)]
pub struct ExportRequest {
    pub kind: ExportKind,
    pub out: PathBuf,
    pub record: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

impl ExportRequest {
    fn validate(&self) -> Result<(), CliError> {
        let ok = match self.kind {
            ExportKind::Tfi | ExportKind::Zcfeature => self.record.is_some(),
            ExportKind::SpatialWeights | ExportKind::ChannelWeights => self.model.is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::user(format!("{:?} export needs --record for features, --model for weights", self.kind)))
        }
    }
}

/// Adaptive weights `omega` of a saved model: `(values, width, height)`.
pub fn model_weights(net: &FusionNet, spatial: bool) -> Result<(Vec<f64>, usize, usize), CliError> {
    let stats = net
        .stats
        .as_ref()
        .ok_or_else(|| CliError::user("model has no adaptive-weighting statistics"))?;
    let mut g = Graph::new(Mode::Eval);
    let f = g.constant(Tensor::zeros(&[1, stats.height, stats.width, stats.depth]));
    afw_apply(&mut g, &net.params, f, stats, true, true)?;
    let tap = if spatial { "afw.omega_s" } else { "afw.omega_c" };
    let w = g
        .tapped(tap)
        .ok_or_else(|| CliError::Internal(format!("missing tap {tap}")))?
        .data()
        .to_vec();
    let (width, height) = if spatial { (stats.width, stats.height) } else { (stats.depth, 1) };
    if w.len() != width * height {
        return Err(CliError::Internal(format!("{tap} holds {} values", w.len())));
    }
    Ok((w, width, height))
}

fn tns_path(out: &Path) -> PathBuf {
    out.with_extension("tns")
}

pub fn cmd_export(ctx: &Ctx, req: &ExportRequest) -> Result<(), CliError> {
    req.validate()?;
    let mut m = ctx.manifest("export");
    match req.kind {
        ExportKind::Tfi | ExportKind::Zcfeature => {
            let path = req.record.as_ref().expect("validated");
            let rec = read_iq(path)?;
            let fz = ctx.config.features.featurizer()?;
            let (blob, plane, (width, height)) = if req.kind == ExportKind::Tfi {
                let t = fz.tfi(&rec)?;
                // first channel as the heatmap
                let c = t.channels;
                let plane: Vec<f64> = t.values.iter().step_by(c).copied().collect();
                (t.to_blob(), plane, (t.width, t.height))
            } else {
                let mut rng = seeded_rng(ctx.seed);
                let z = fz.zc(&rec, &mut rng, ctx.exec())?;
                (z.to_blob(), z.values.clone(), (z.cols, z.rows))
            };
            save_blob(&tns_path(&req.out), &blob)?;
            write_heatmap(&req.out, &plane, width, height, Scale::MinMax)?;
            m.inputs.push(path.display().to_string());
            m.outputs.push(tns_path(&req.out).display().to_string());
        }
        ExportKind::SpatialWeights | ExportKind::ChannelWeights => {
            let dir = req.model.as_ref().expect("validated");
            let (net, _) = load_model(dir)?;
            let (w, width, height) = model_weights(&net, req.kind == ExportKind::SpatialWeights)?;
            write_heatmap(&req.out, &w, width, height, Scale::Fixed(0.0, 1.0))?;
            m.inputs.push(dir.display().to_string());
        }
    }
    m.outputs.push(req.out.display().to_string());
    m.write(&ctx.config, &req.out)?;
    println!("wrote {}", req.out.display());
    Ok(())
}
