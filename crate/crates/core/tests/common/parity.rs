//! Graph-versus-reference comparisons of the fusion stages on random inputs.

use rand::Rng;
use zcfuse::fusion_net::afw::{afw_apply, init_afw};
use zcfuse::fusion_net::mmff::{init_mmff, mmff};
use zcfuse::fusion_net::mmfi::{init_mmfi, mmfi};
use zcfuse::fusion_net::smff::{init_smff, smff};
use zcfuse::fusion_net::ClassStats;
use zcfuse::signal_synth::seeded_rng;
use zcfuse::tensor::{Graph, Mode, ParamStore, Tensor};

use super::reference::*;

pub const N: usize = 2;
pub const H: usize = 4;
pub const W: usize = 4;
pub const C: usize = 8;

/// Kaiming init, then every value (biases included) jittered so no term of
/// the reference is trivially zero.
pub fn jitter(store: &mut ParamStore, rng: &mut impl Rng) {
    for (_, p) in store.iter_mut() {
        for v in p.value.data_mut() {
            *v += 0.3 * (rng.random::<f64>() - 0.5);
        }
    }
}

pub fn input(rng: &mut impl Rng, c: usize) -> Tensor {
    Tensor::randn(&[N, H, W, c], 1.0, rng)
}

/// Largest deviation over the four outputs.
pub fn mmfi_parity(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut store = ParamStore::new();
    init_mmfi(&mut store, C, &mut rng).unwrap();
    jitter(&mut store, &mut rng);
    let (t, z) = (input(&mut rng, C), input(&mut rng, C));
    let mut g = Graph::new(Mode::Eval);
    let (vt, vz) = (g.constant(t.clone()), g.constant(z.clone()));
    let out = mmfi(&mut g, &store, vt, vz).unwrap();
    let r = mmfi_ref(&store, &Map::from_tensor(&t), &Map::from_tensor(&z));
    [(out.fc_tfi, &r.fc_tfi), (out.fc_zc, &r.fc_zc), (out.fs_tfi, &r.fs_tfi), (out.fs_zc, &r.fs_zc)]
        .iter()
        .map(|(v, m)| max_diff(g.value(*v).data(), &m.v))
        .fold(0.0, f64::max)
}

pub struct SmffCheck {
    pub diff: f64,
    pub f13_inside_unit: bool,
    pub shape_ok: bool,
}

pub fn smff_parity(seed: u64) -> SmffCheck {
    let mut rng = seeded_rng(100 + seed);
    let mut store = ParamStore::new();
    init_smff(&mut store, "smff.tfi", C, &mut rng).unwrap();
    jitter(&mut store, &mut rng);
    let (fc, fs) = (input(&mut rng, C), input(&mut rng, C));
    let mut g = Graph::new(Mode::Eval);
    let (a, b) = (g.constant(fc.clone()), g.constant(fs.clone()));
    let out = smff(&mut g, &store, "smff.tfi", a, b).unwrap();
    let r = smff_ref(&store, "smff.tfi", &Map::from_tensor(&fc), &Map::from_tensor(&fs));
    let f13 = g.tapped("smff.tfi.f13").unwrap();
    SmffCheck {
        diff: max_diff(g.value(out).data(), &r.v),
        f13_inside_unit: f13.data().iter().all(|v| *v > 0.0 && *v < 1.0),
        shape_ok: g.shape(out) == [N, H, W, C],
    }
}

pub struct MmffCheck {
    /// Fused output and both attention maps against the reference.
    pub diff: f64,
    /// Largest `|row sum - 1|` over both attention maps.
    pub row_sum_err: f64,
    pub rows_nonnegative: bool,
    pub rows: usize,
}

/// Row-sum error of the attention taps of a finished graph.
pub fn attention_rows(g: &Graph) -> (f64, bool, usize) {
    let mut err: f64 = 0.0;
    let mut nonneg = true;
    let mut rows = 0;
    for tap in ["mmff.aw_tfi", "mmff.aw_zc"] {
        let aw = g.tapped(tap).expect("attention tap");
        let hw = aw.shape()[2];
        for row in aw.data().chunks(hw) {
            err = err.max((row.iter().sum::<f64>() - 1.0).abs());
            nonneg &= row.iter().all(|v| *v >= 0.0);
            rows += 1;
        }
    }
    (err, nonneg, rows)
}

pub fn mmff_parity(seed: u64) -> MmffCheck {
    let mut rng = seeded_rng(200 + seed);
    let mut store = ParamStore::new();
    init_mmff(&mut store, C, &mut rng).unwrap();
    jitter(&mut store, &mut rng);
    let (t, z) = (input(&mut rng, C), input(&mut rng, C));
    let mut g = Graph::new(Mode::Eval);
    let (a, b) = (g.constant(t.clone()), g.constant(z.clone()));
    let out = mmff(&mut g, &store, a, b).unwrap();
    let r = mmff_ref(&store, &Map::from_tensor(&t), &Map::from_tensor(&z));
    let mut diff = max_diff(g.value(out).data(), &r.fused.v);
    for (tap, want) in [("mmff.aw_tfi", &r.aw_tfi), ("mmff.aw_zc", &r.aw_zc)] {
        let flat: Vec<f64> = want.iter().flatten().flatten().copied().collect();
        diff = diff.max(max_diff(g.tapped(tap).unwrap().data(), &flat));
    }
    let (row_sum_err, rows_nonnegative, rows) = attention_rows(&g);
    MmffCheck {
        diff,
        row_sum_err,
        rows_nonnegative,
        rows,
    }
}

pub fn random_stats(rng: &mut impl Rng, p: usize, d: usize) -> ClassStats {
    let means: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..H * W * d).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect())
        .collect();
    ClassStats::from_class_means(&means, H, W, d).unwrap()
}

/// Largest deviation over the three weighting modes.
pub fn afw_parity(seed: u64) -> f64 {
    let d = C / 4;
    let mut rng = seeded_rng(300 + seed);
    let mut store = ParamStore::new();
    init_afw(&mut store, 0.5).unwrap();
    jitter(&mut store, &mut rng);
    let stats = random_stats(&mut rng, 3, d);
    let f = input(&mut rng, d);
    let mut worst: f64 = 0.0;
    for (sp, ch) in [(true, true), (true, false), (false, true)] {
        let mut g = Graph::new(Mode::Eval);
        let x = g.constant(f.clone());
        let out = afw_apply(&mut g, &store, x, &stats, sp, ch).unwrap();
        let r = afw_ref(&store, &Map::from_tensor(&f), &stats, sp, ch);
        worst = worst.max(max_diff(g.value(out).data(), &r.v));
    }
    worst
}
