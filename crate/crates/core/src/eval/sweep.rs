use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ablation::{evaluate, EvalReport};
use super::corpus::{draw, snr_tag, Condition, SPLIT_OOD, SPLIT_TEST};
use crate::exec::Exec;
use crate::features::Featurizer;
use crate::fusion_net::FusionNet;
use crate::signal_synth::{Distance, Los, ProtocolProfile};
use crate::{Error, Result};

/// Fixed header of the results table.
pub const RESULTS_HEADER: &str = "axis,value,seed,accuracy,precision,recall,oodd_acc,auroc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Snr,
    Distance,
    Los,
    Duration,
    OodType,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Snr => "snr",
            Axis::Distance => "distance",
            Axis::Los => "los",
            Axis::Duration => "duration",
            Axis::OodType => "ood_type",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Axis::Snr, Axis::Distance, Axis::Los, Axis::Duration, Axis::OodType]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::param(format!("unknown sweep axis '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    /// Axis values as written in the table: dB for `snr`, `D00`/`D01`/`D10`
    /// for `distance`, `S00`/`S01` for `los`, samples for `duration`, OOD
    /// class ids for `ood_type`.
    pub values: Vec<String>,
    pub repetitions: usize,
    pub seed: u64,
}

/// What a single axis value changes relative to the base condition.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Setting {
    Snr(f64),
    Distance(Distance),
    Los(Los),
    Duration(usize),
    OodType(u32),
}

fn parse_value(axis: Axis, v: &str) -> Result<Setting> {
    let bad = |_| Error::param(format!("value '{v}' does not fit axis {}", axis.name()));
    Ok(match axis {
        Axis::Snr => {
            let x: f64 = v.trim().parse().map_err(|_| Error::param(format!("value '{v}' does not fit axis snr")))?;
            if !x.is_finite() {
                return Err(Error::param(format!("value '{v}' does not fit axis snr")));
            }
            Setting::Snr(x)
        }
        Axis::Distance => Setting::Distance(v.trim().parse().map_err(bad)?),
        Axis::Los => Setting::Los(v.trim().parse().map_err(bad)?),
        Axis::Duration => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("value '{v}' does not fit axis duration")))?;
            if n == 0 {
                return Err(Error::param("duration must be positive"));
            }
            Setting::Duration(n)
        }
        Axis::OodType => Setting::OodType(
            v.trim()
                .parse()
                .map_err(|_| Error::param(format!("value '{v}' does not fit axis ood_type")))?,
        ),
    })
}

impl SweepSpec {
    fn settings(&self) -> Result<Vec<Setting>> {
        if self.values.is_empty() {
            return Err(Error::param("sweep without values"));
        }
        if self.repetitions == 0 {
            return Err(Error::param("sweep needs at least one repetition"));
        }
        self.values.iter().map(|v| parse_value(self.axis, v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.settings().map(|_| ())
    }
}

/// Draws fresh test corpora for the sweep.
#[derive(Debug, Clone)]
pub struct SweepGenerator<'a> {
    pub profiles: &'a [ProtocolProfile],
    pub featurizer: &'a Featurizer,
    pub id_classes: Vec<u32>,
    pub ood_classes: Vec<u32>,
    pub id_per_class: usize,
    pub ood_per_class: usize,
    /// Condition every axis value departs from.
    pub base: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: String,
    pub seed: u64,
    pub report: EvalReport,
}

impl SweepRow {
    pub fn to_line(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.axis.name(),
            self.value,
            self.seed,
            r.rid.accuracy,
            r.rid.precision,
            r.rid.recall,
            r.oodd_acc,
            r.auroc
        )
    }
}

/// Evaluates `net` on a fresh draw for every (value, repetition) pair.
/// Repetition `k` uses draw seed `spec.seed + k`.
pub fn sweep(spec: &SweepSpec, net: &FusionNet, gen: &SweepGenerator, batch: usize, exec: Exec) -> Result<Vec<SweepRow>> {
    let settings = spec.settings()?;
    let mut rows = Vec::with_capacity(settings.len() * spec.repetitions);
    for (value, setting) in spec.values.iter().zip(settings) {
        let mut cond = gen.base;
        let mut ood_classes = gen.ood_classes.clone();
        match setting {
            Setting::Snr(x) => cond.snr_db = x,
            Setting::Distance(d) => cond.meta.distance = d,
            Setting::Los(l) => cond.meta.los = l,
            Setting::Duration(n) => cond.record_len = n,
            Setting::OodType(c) => {
                if !gen.ood_classes.contains(&c) {
                    return Err(Error::param(format!("class {c} is not an OOD class")));
                }
                ood_classes = vec![c];
            }
        }
        // Tag mixes every condition field so distinct values never share draws.
        let tag = snr_tag(cond.snr_db)
            ^ (cond.record_len as u64).rotate_left(17)
            ^ ((cond.meta.distance as u64) << 40)
            ^ ((cond.meta.los as u64) << 44);
        for k in 0..spec.repetitions {
            let seed = spec.seed.wrapping_add(k as u64);
            let test = draw(
                gen.profiles,
                &gen.id_classes,
                gen.featurizer,
                &cond,
                tag,
                SPLIT_TEST,
                gen.id_per_class,
                seed,
                exec,
            )?;
            let ood = draw(
                gen.profiles,
                &ood_classes,
                gen.featurizer,
                &cond,
                tag,
                SPLIT_OOD,
                gen.ood_per_class,
                seed,
                exec,
            )?;
            rows.push(SweepRow {
                axis: spec.axis,
                value: value.trim().to_string(),
                seed,
                report: evaluate(net, &test, &ood, batch, exec)?,
            });
        }
    }
    Ok(rows)
}

/// Results table with the fixed header.
pub fn results_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.to_line());
    }
    s
}

pub fn write_results(path: &Path, rows: &[SweepRow]) -> Result<()> {
    std::fs::write(path, results_csv(rows)).map_err(|e| Error::io(path, e))
}
