//! Catalogue of gradient checks: every graph operation, the fusion stages
//! and the whole network.

use rand::Rng;
use zcfuse::fusion_net::afw::{afw_apply, init_afw};
use zcfuse::fusion_net::mmff::{init_mmff, mmff};
use zcfuse::fusion_net::mmfi::{init_mmfi, mmfi};
use zcfuse::fusion_net::smff::{init_smff, smff};
use zcfuse::fusion_net::{batch_inputs, fused_stats, Arch, ClassStats, FusionNet, NetConfig, Sample};
use zcfuse::signal_synth::seeded_rng;
use zcfuse::tensor::{grad_check, grad_check_params, GradCheckReport, Graph, Mode, ParamStore, Tensor, Var};
use zcfuse::Result;

pub const TOL: f64 = 1e-4;
pub const X: [usize; 4] = [2, 4, 4, 8];

pub type OpFn = fn(&mut Graph, &[Var]) -> Result<Var>;

pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub op: OpFn,
}

fn case(name: &'static str, shapes: &[&[usize]], op: OpFn) -> OpCase {
    OpCase {
        name,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        op,
    }
}

pub fn op_cases() -> Vec<OpCase> {
    vec![
        case("add", &[&X, &X], |g, v| g.add(v[0], v[1])),
        case("sub", &[&X, &X], |g, v| g.sub(v[0], v[1])),
        case("mul", &[&X, &X], |g, v| g.mul(v[0], v[1])),
        case("mul_bcast channel", &[&X, &[2, 1, 1, 8]], |g, v| g.mul_bcast(v[0], v[1])),
        case("mul_bcast spatial", &[&X, &[2, 4, 4, 1]], |g, v| g.mul_bcast(v[0], v[1])),
        case("mul_bcast shared channel", &[&X, &[1, 1, 1, 8]], |g, v| g.mul_bcast(v[0], v[1])),
        case("mul_bcast shared spatial", &[&X, &[1, 4, 4, 1]], |g, v| g.mul_bcast(v[0], v[1])),
        case("scale", &[&X], |g, v| g.scale(v[0], -1.7)),
        case("mul_scalar", &[&X, &[1]], |g, v| g.mul_scalar(v[0], v[1])),
        case("add_scalar", &[&X, &[1]], |g, v| g.add_scalar(v[0], v[1])),
        case("relu", &[&X], |g, v| Ok(g.relu(v[0]))),
        case("sigmoid", &[&X], |g, v| Ok(g.sigmoid(v[0]))),
        case("hswish", &[&X], |g, v| Ok(g.hswish(v[0]))),
        case("hswish wide", &[&X], |g, v| {
            let s = g.scale(v[0], 3.0)?;
            Ok(g.hswish(s))
        }),
        case("softmax", &[&X], |g, v| g.softmax(v[0])),
        case("reshape", &[&X], |g, v| g.reshape(v[0], &[2, 16, 8])),
        case("concat", &[&X, &[2, 4, 4, 3]], |g, v| g.concat(&[v[0], v[1]])),
        case("split", &[&X], |g, v| g.split(v[0], 2, 5)),
        case("channel_shuffle", &[&X], |g, v| g.channel_shuffle(v[0], 4)),
        case("upsample_nn", &[&[2, 3, 3, 8]], |g, v| g.upsample_nn(v[0], 4, 4)),
        case("gap", &[&X], |g, v| g.gap(v[0])),
        case("gmp", &[&X], |g, v| g.gmp(v[0])),
        case("gap_spatial", &[&X], |g, v| g.gap_spatial(v[0])),
        case("gmp_spatial", &[&X], |g, v| g.gmp_spatial(v[0])),
        case("sum", &[&X], |g, v| Ok(g.sum(v[0]))),
        case("matmul", &[&[2, 16, 8], &[2, 8, 5]], |g, v| g.matmul(v[0], v[1], false)),
        case("matmul transposed", &[&[2, 16, 8], &[2, 16, 8]], |g, v| g.matmul(v[0], v[1], true)),
        case("matmul rank 2", &[&[3, 4], &[4, 6]], |g, v| g.matmul(v[0], v[1], false)),
        case("linear", &[&[2, 8], &[8, 5], &[5]], |g, v| g.linear(v[0], v[1], v[2])),
        case("conv 3x3", &[&X, &[3, 3, 8, 6], &[6]], |g, v| g.conv2d(v[0], v[1], Some(v[2]), 1, 1)),
        case("conv 3x3 stride 2", &[&X, &[3, 3, 8, 6]], |g, v| g.conv2d(v[0], v[1], None, 2, 1)),
        case("conv 1x1", &[&X, &[1, 1, 8, 4], &[4]], |g, v| g.conv2d(v[0], v[1], Some(v[2]), 1, 0)),
        case("depthwise", &[&X, &[3, 3, 8], &[8]], |g, v| g.depthwise_conv2d(v[0], v[1], Some(v[2]), 1, 1)),
        case("depthwise stride 2", &[&X, &[3, 3, 8]], |g, v| g.depthwise_conv2d(v[0], v[1], None, 2, 1)),
    ]
}

/// Scalar readout with fixed random weights, so no gradient cancels by
/// symmetry.
pub fn readout(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let mut rng = seeded_rng(seed ^ 0xABCD);
    let w = Tensor::randn(g.shape(y), 1.0, &mut rng);
    g.weighted_sum(y, &w)
}

pub fn check_op(c: &OpCase, seed: u64) -> GradCheckReport {
    let mut rng = seeded_rng(seed);
    let inputs: Vec<Tensor> = c.shapes.iter().map(|s| Tensor::randn(s, 1.0, &mut rng)).collect();
    let op = c.op;
    grad_check(&inputs, Mode::Eval, None, &mut rng, |g, v| {
        let y = op(g, v)?;
        readout(g, y, seed)
    })
    .unwrap()
}

pub fn check_cross_entropy(seed: u64) -> GradCheckReport {
    let mut rng = seeded_rng(seed);
    let logits = Tensor::randn(&[4, 5], 2.0, &mut rng);
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
    grad_check(&[logits], Mode::Eval, None, &mut rng, |g, v| g.cross_entropy(v[0], &labels)).unwrap()
}

/// Input and parameter reports of batch normalization.
pub fn check_batch_norm(mode: Mode, seed: u64) -> [GradCheckReport; 2] {
    let mut rng = seeded_rng(seed);
    let mut store = ParamStore::new();
    store.init_bn("bn", 8).unwrap();
    for (name, p) in store.iter_mut() {
        let shift = if name.ends_with("running_var") || name.ends_with("gamma") { 1.0 } else { 0.0 };
        for v in p.value.data_mut() {
            *v = shift + 0.5 * (rng.random::<f64>() - 0.5);
        }
    }
    let x = Tensor::randn(&X, 1.0, &mut rng);
    let a = grad_check(&[x.clone()], mode, None, &mut rng, |g, v| {
        let y = g.batch_norm(v[0], &store, "bn")?;
        readout(g, y, seed)
    })
    .unwrap();
    let b = grad_check_params(&store, &[], mode, None, &mut rng, |g, s| {
        let xv = g.constant(x.clone());
        let y = g.batch_norm(xv, s, "bn")?;
        readout(g, y, seed)
    })
    .unwrap();
    [a, b]
}

fn jittered(init: impl Fn(&mut ParamStore, &mut rand_chacha::ChaCha8Rng), seed: u64) -> ParamStore {
    let mut rng = seeded_rng(seed);
    let mut s = ParamStore::new();
    init(&mut s, &mut rng);
    for (_, p) in s.iter_mut() {
        for v in p.value.data_mut() {
            *v += 0.2 * (rng.random::<f64>() - 0.5);
        }
    }
    s
}

/// Input and parameter reports of a two-input stage.
fn check_stage(
    c_in: usize,
    store: &ParamStore,
    seed: u64,
    f: impl Fn(&mut Graph, &ParamStore, Var, Var) -> Result<Var>,
) -> [GradCheckReport; 2] {
    let mut rng = seeded_rng(seed + 1000);
    let a = Tensor::randn(&[2, 4, 4, c_in], 1.0, &mut rng);
    let b = Tensor::randn(&[2, 4, 4, c_in], 1.0, &mut rng);
    let ri = grad_check(&[a.clone(), b.clone()], Mode::Eval, None, &mut rng, |g, v| {
        let y = f(g, store, v[0], v[1])?;
        readout(g, y, seed)
    })
    .unwrap();
    let rp = grad_check_params(store, &[], Mode::Eval, None, &mut rng, |g, s| {
        let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
        let y = f(g, s, va, vb)?;
        readout(g, y, seed)
    })
    .unwrap();
    [ri, rp]
}

pub const STAGES: [&str; 4] = ["mmfi", "smff", "mmff", "afw"];

pub fn check_named_stage(name: &str, seed: u64) -> [GradCheckReport; 2] {
    match name {
        "mmfi" => {
            let store = jittered(|s, r| init_mmfi(s, 8, r).unwrap(), seed);
            check_stage(8, &store, seed, |g, s, a, b| {
                let o = mmfi(g, s, a, b)?;
                g.concat(&[o.fc_tfi, o.fc_zc, o.fs_tfi, o.fs_zc])
            })
        }
        "smff" => {
            let store = jittered(|s, r| init_smff(s, "smff.tfi", 8, r).unwrap(), seed);
            check_stage(8, &store, seed, |g, s, a, b| smff(g, s, "smff.tfi", a, b))
        }
        "mmff" => {
            let store = jittered(|s, r| init_mmff(s, 8, r).unwrap(), seed);
            check_stage(8, &store, seed, |g, s, a, b| mmff(g, s, a, b))
        }
        "afw" => {
            let mut rng = seeded_rng(seed + 77);
            let store = jittered(|s, _| init_afw(s, 0.5).unwrap(), seed);
            let means: Vec<Vec<f64>> = (0..3).map(|_| (0..4 * 4 * 2).map(|_| rng.random::<f64>()).collect()).collect();
            let stats = ClassStats::from_class_means(&means, 4, 4, 2).unwrap();
            check_stage(2, &store, seed, |g, s, a, b| {
                let x = g.add(a, b)?;
                afw_apply(g, s, x, &stats, true, true)
            })
        }
        other => panic!("unknown stage {other}"),
    }
}

fn toy_sample(rng: &mut impl Rng, cfg: &NetConfig, label: usize) -> Sample {
    let side = cfg.image_size;
    Sample {
        tfi: (0..side * side * cfg.tfi_channels).map(|_| rng.random::<f64>()).collect(),
        zc: (0..cfg.zc_rows * cfg.zc_cols).map(|_| rng.random::<f64>()).collect(),
        iq: (0..side * side * 2).map(|_| rng.random::<f64>() - 0.5).collect(),
        label,
    }
}

/// Cross-entropy of a two-sample batch in training mode: parameter report
/// (`param_limit` coordinates per tensor) and input report.
pub fn check_full_network(arch: Arch, seed: u64, param_limit: usize) -> [GradCheckReport; 2] {
    let mut rng = seeded_rng(seed + 9000);
    let cfg = NetConfig::desk(arch, 2, 9);
    let mut net = FusionNet::new(cfg.clone(), &mut rng).unwrap();
    let samples = vec![toy_sample(&mut rng, &cfg, 0), toy_sample(&mut rng, &cfg, 1)];
    if cfg.uses_afw() {
        net.stats = Some(fused_stats(&net, &samples, 2).unwrap());
    }
    let refs: Vec<&Sample> = samples.iter().collect();
    let inputs = batch_inputs(&cfg, &refs).unwrap();
    let labels = [0usize, 1];
    let rp = grad_check_params(&net.params, &[], Mode::Train, Some(param_limit), &mut rng, |g, s| {
        let mut n = net.clone();
        n.params = s.clone();
        let out = n.forward(g, &inputs, false)?;
        g.cross_entropy(out.logits, &labels)
    })
    .unwrap();
    let leaves: Vec<Tensor> = inputs.image.clone().into_iter().chain(inputs.zc.clone()).collect();
    let ri = grad_check(&leaves, Mode::Train, Some(40), &mut rng, |g, v| {
        let out = net.forward_vars(g, Some(v[0]), v.get(1).copied(), false)?;
        g.cross_entropy(out.logits, &labels)
    })
    .unwrap();
    [rp, ri]
}
