//! Zadoff-Chu and adaptive-weighting oracles reduced to worst-case numbers,
//! shared by the per-module tests and the acceptance run.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use zcfuse::features::{xcorr_norm, FeatureConfig, Featurizer};
use zcfuse::fusion_net::afw::{afw_apply, init_afw, omega};
use zcfuse::fusion_net::{batch_inputs, fused_stats, Arch, ClassStats, FusionNet, NetConfig, Sample};
use zcfuse::signal_synth::{
    desk_candidates, desk_profiles, gen_zc, seeded_rng, synth_record, zc_reference, ChannelConfig, DESK_RECORD_LEN,
};
use zcfuse::tensor::{Graph, Mode, ParamStore, Tensor};
use zcfuse::Exec;

fn noise(rng: &mut impl Rng, n: usize, std: f64) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * std
        })
        .collect()
}

pub struct PeakCheck {
    pub min_gamma: f64,
    /// Seeds whose global maximum is not at the embedding offset.
    pub misplaced: Vec<u64>,
}

/// Embeds a reference in noise at a random offset and locates the peak.
pub fn embedded_peaks(seeds: u64) -> PeakCheck {
    let roots: Vec<(u32, u32, usize)> = desk_candidates()
        .iter()
        .map(|r| (r.root, r.len, 8))
        .chain([(1, 7, 1), (3, 13, 4)])
        .collect();
    let mut out = PeakCheck {
        min_gamma: f64::INFINITY,
        misplaced: Vec::new(),
    };
    for seed in 0..seeds {
        let mut rng = seeded_rng(seed);
        let &(r, v, factor) = &roots[seed as usize % roots.len()];
        let reference = zc_reference(r, v, factor).unwrap();
        let mut x = noise(&mut rng, 4096, 0.7);
        let off = rng.random_range(0..x.len() - reference.len());
        x[off..off + reference.len()].copy_from_slice(&reference);
        let gamma = xcorr_norm(&reference, &x).unwrap();
        out.min_gamma = out.min_gamma.min(gamma[off]);
        let arg = gamma.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        if arg != off {
            out.misplaced.push(seed);
        }
    }
    out
}

pub struct RowCheck {
    pub min_matched: f64,
    pub max_mismatched: f64,
    pub records: usize,
}

/// Row maxima of the correlation features over records of the ZC protocols.
pub fn row_separation(snrs: &[f64], seeds: u64) -> RowCheck {
    let cand = desk_candidates();
    let fz = Featurizer::new(FeatureConfig::desk(&cand)).unwrap();
    let zc_profiles: Vec<_> = desk_profiles().into_iter().filter(|p| p.uses_zc).collect();
    let mut out = RowCheck {
        min_matched: f64::INFINITY,
        max_mismatched: 0.0,
        records: 0,
    };
    for &snr in snrs {
        for seed in 0..seeds {
            let p = &zc_profiles[seed as usize % zc_profiles.len()];
            let row = cand.iter().position(|c| Some(*c) == p.primary()).unwrap();
            let mut rng = seeded_rng(10_000 + seed);
            let ch = ChannelConfig::awgn(snr, seed);
            let rec = synth_record(p, &ch, DESK_RECORD_LEN, &mut rng).unwrap();
            let f = fz.zc(&rec, &mut rng, Exec::Sequential).unwrap();
            for i in 0..cand.len() {
                let m = f.row_max(i);
                if i == row {
                    out.min_matched = out.min_matched.min(m);
                } else {
                    out.max_mismatched = out.max_mismatched.max(m);
                }
            }
            out.records += 1;
        }
    }
    out
}

/// Largest normalised periodic cross-correlation over all lags.
fn cross_peak(a: &[Complex64], b: &[Complex64]) -> f64 {
    let v = a.len();
    (0..v)
        .map(|m| (0..v).map(|n| a[n] * b[(n + m) % v].conj()).sum::<Complex64>().norm() / v as f64)
        .fold(0.0, f64::max)
}

/// Largest `peak * sqrt(V)` over distinct root pairs: every pair of V = 7
/// and 13, and the candidates, secondaries and random roots of V = 139.
/// The bound holds when this stays at 1.
pub fn cross_root_ratio() -> f64 {
    let mut worst: f64 = 0.0;
    let mut pairs = |v: u32, roots: &[u32]| {
        let seqs: Vec<Vec<Complex64>> = roots.iter().map(|&r| gen_zc(r, v).unwrap()).collect();
        for i in 0..seqs.len() {
            for j in i + 1..seqs.len() {
                worst = worst.max(cross_peak(&seqs[i], &seqs[j]) * (v as f64).sqrt());
            }
        }
    };
    for v in [7u32, 13] {
        pairs(v, &(1..v).collect::<Vec<_>>());
    }
    let mut roots: Vec<u32> = desk_candidates().iter().map(|r| r.root).collect();
    roots.extend([70, 1, 2, 138]);
    let mut rng = seeded_rng(3);
    roots.extend((0..10).map(|_| rng.random_range(1..139)));
    roots.sort_unstable();
    roots.dedup();
    pairs(139, &roots);
    worst
}

fn random_means(rng: &mut impl Rng, p: usize, len: usize) -> Vec<Vec<f64>> {
    (0..p).map(|_| (0..len).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect()).collect()
}

/// Identical class means give `S = 1`, `V = 0` and `W = alpha`.
pub fn identical_means_error(seeds: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let mut rng = seeded_rng(seed);
        let (h, w, d) = (4, 4, 8);
        let m: Vec<f64> = (0..h * w * d).map(|_| rng.random::<f64>() + 0.1).collect();
        let st = ClassStats::from_class_means(&vec![m; 5], h, w, d).unwrap();
        let alpha = rng.random::<f64>();
        for s in st.s_s.iter().chain(&st.s_c) {
            worst = worst.max((s - 1.0).abs());
        }
        for v in st.v_s.iter().chain(&st.v_c) {
            worst = worst.max(v.abs());
        }
        for x in st.w_spatial(alpha).iter().chain(&st.w_channel(alpha)) {
            worst = worst.max((x - alpha).abs());
        }
    }
    worst
}

/// `W = S` at alpha 1 and `W = -V` at alpha 0, from the statistics and from
/// the graph taps.
pub fn alpha_endpoint_error(seeds: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let mut rng = seeded_rng(100 + seed);
        let st = ClassStats::from_class_means(&random_means(&mut rng, 3, 4 * 4 * 2), 4, 4, 2).unwrap();
        for (w, s) in st.w_spatial(1.0).iter().zip(&st.s_s).chain(st.w_channel(1.0).iter().zip(&st.s_c)) {
            worst = worst.max((w - s).abs());
        }
        for (w, v) in st.w_spatial(0.0).iter().zip(&st.v_s).chain(st.w_channel(0.0).iter().zip(&st.v_c)) {
            worst = worst.max((w + v).abs());
        }
        for alpha in [0.0, 1.0] {
            let mut store = ParamStore::new();
            init_afw(&mut store, alpha).unwrap();
            let mut g = Graph::new(Mode::Eval);
            let f = g.constant(Tensor::full(&[1, 4, 4, 2], 1.0));
            afw_apply(&mut g, &store, f, &st, true, true).unwrap();
            let ws = g.tapped("afw.w_s").unwrap().data().to_vec();
            let wc = g.tapped("afw.w_c").unwrap().data().to_vec();
            let (want_s, want_c): (Vec<f64>, Vec<f64>) = if alpha == 1.0 {
                (st.s_s.clone(), st.s_c.clone())
            } else {
                (st.v_s.iter().map(|v| -v).collect(), st.v_c.iter().map(|v| -v).collect())
            };
            for (a, b) in ws.iter().zip(&want_s).chain(wc.iter().zip(&want_c)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// `omega` strictly decreasing in `W`, inside (0, 1), and 1/2 at `W = 0`
/// for `a > 0`, `b = 0`.
pub fn omega_shape_holds() -> bool {
    let mut ok = true;
    for a in [0.5, 1.0, 3.0] {
        for b in [-1.0, 0.0, 2.0] {
            let ws: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.05).collect();
            ok &= ws.windows(2).all(|p| omega(p[1], a, b) < omega(p[0], a, b));
            ok &= ws.iter().all(|w| {
                let o = omega(*w, a, b);
                o > 0.0 && o < 1.0
            });
        }
    }
    ok && omega(0.0, 1.0, 0.0) == 0.5 && omega(0.0, 3.0, 0.0) == 0.5
}

/// Raising one spatial score lowers that position's weight and leaves every
/// other weight unchanged.
pub fn local_score_change_is_local() -> bool {
    let mut rng = seeded_rng(9);
    let mut st = ClassStats::from_class_means(&random_means(&mut rng, 3, 4 * 4 * 2), 4, 4, 2).unwrap();
    let mut store = ParamStore::new();
    init_afw(&mut store, 0.5).unwrap();
    let weights = |st: &ClassStats| {
        let mut g = Graph::new(Mode::Eval);
        let f = g.constant(Tensor::full(&[1, 4, 4, 2], 1.0));
        afw_apply(&mut g, &store, f, st, true, false).unwrap();
        g.tapped("afw.omega_s").unwrap().data().to_vec()
    };
    let before = weights(&st);
    st.s_s[5] += 0.1;
    let after = weights(&st);
    before
        .iter()
        .zip(&after)
        .enumerate()
        .all(|(i, (a, b))| if i == 5 { b < a } else { a == b })
}

/// Zero scores give weight exactly 1/2 in the graph.
pub fn zero_score_gives_half() -> bool {
    let st = ClassStats {
        class_count: 2,
        height: 2,
        width: 2,
        depth: 2,
        m_s: vec![0.0; 8],
        m_c: vec![0.0; 4],
        s_s: vec![0.0; 4],
        v_s: vec![0.0; 4],
        s_c: vec![0.0; 2],
        v_c: vec![0.0; 2],
    };
    let mut store = ParamStore::new();
    init_afw(&mut store, 0.5).unwrap();
    let mut g = Graph::new(Mode::Eval);
    let f = g.constant(Tensor::full(&[1, 2, 2, 2], 1.0));
    afw_apply(&mut g, &store, f, &st, true, true).unwrap();
    g.tapped("afw.omega_s").unwrap().data().iter().all(|v| *v == 0.5)
        && g.tapped("afw.omega_c").unwrap().data().iter().all(|v| *v == 0.5)
}

/// With `a = 0` and a large `b` every weight is 1, and the network's logits
/// equal those of the same network with weighting switched off, bit for bit.
pub fn unit_weights_match_plain_network(seeds: u64) -> bool {
    let mut ok = true;
    for seed in 0..seeds {
        let mut rng = seeded_rng(700 + seed);
        let cfg = NetConfig::desk(Arch::Fusion, 3, 9);
        let mut net = FusionNet::new(cfg.clone(), &mut rng).unwrap();
        let samples: Vec<Sample> = (0..6)
            .map(|i| Sample {
                tfi: (0..32 * 32).map(|_| rng.random()).collect(),
                zc: (0..9 * 64).map(|_| rng.random()).collect(),
                iq: vec![0.0; 32 * 32 * 2],
                label: i % 3,
            })
            .collect();
        net.stats = Some(fused_stats(&net, &samples, 6).unwrap());
        for (n, v) in [("afw.a_s", 0.0), ("afw.a_c", 0.0), ("afw.b_s", 1e3), ("afw.b_c", 1e3)] {
            net.params.set_value(n, Tensor::scalar(v)).unwrap();
        }
        let mut plain = net.clone();
        plain.config.afw_spatial = false;
        plain.config.afw_channel = false;
        ok &= !plain.config.uses_afw();

        let refs: Vec<&Sample> = samples.iter().collect();
        let inputs = batch_inputs(&cfg, &refs).unwrap();
        for mode in [Mode::Eval, Mode::Train] {
            let mut g = Graph::new(mode);
            let a = net.forward(&mut g, &inputs, false).unwrap();
            ok &= g.tapped("afw.omega_s").unwrap().data().iter().all(|v| *v == 1.0);
            let mut h = Graph::new(mode);
            let b = plain.forward(&mut h, &inputs, false).unwrap();
            ok &= g.value(a.logits).data() == h.value(b.logits).data();
        }
    }
    ok
}
