//! Loop-by-loop reference versions of the fusion stages, written against
//! plain index arithmetic and sharing no code with the graph engine.

use zcfuse::fusion_net::ClassStats;
use zcfuse::tensor::{ParamStore, Tensor};

/// Dense NHWC map.
#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub v: Vec<f64>,
}

impl Map {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self {
            n,
            h,
            w,
            c,
            v: vec![0.0; n * h * w * c],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let s = t.shape();
        assert_eq!(s.len(), 4);
        Self {
            n: s[0],
            h: s[1],
            w: s[2],
            c: s[3],
            v: t.data().to_vec(),
        }
    }

    pub fn idx(&self, n: usize, y: usize, x: usize, c: usize) -> usize {
        ((n * self.h + y) * self.w + x) * self.c + c
    }

    pub fn at(&self, n: usize, y: usize, x: usize, c: usize) -> f64 {
        self.v[self.idx(n, y, x, c)]
    }

    pub fn set(&mut self, n: usize, y: usize, x: usize, c: usize, val: f64) {
        let i = self.idx(n, y, x, c);
        self.v[i] = val;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut o = self.clone();
        o.v.iter_mut().for_each(|x| *x = f(*x));
        o
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Stride-1 convolution with zero padding `k / 2`; weights `[k,k,cin,cout]`.
pub fn conv(x: &Map, store: &ParamStore, prefix: &str) -> Map {
    let wt = store.value(&format!("{prefix}.w")).unwrap();
    let s = wt.shape();
    let (k, cin, cout) = (s[0], s[2], s[3]);
    assert_eq!(cin, x.c);
    let bias = store.value(&format!("{prefix}.b")).ok().map(|b| b.data().to_vec());
    let pad = (k / 2) as isize;
    let mut out = Map::zeros(x.n, x.h, x.w, cout);
    for n in 0..x.n {
        for y in 0..x.h {
            for xx in 0..x.w {
                for o in 0..cout {
                    let mut acc = bias.as_ref().map_or(0.0, |b| b[o]);
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = y as isize + ky as isize - pad;
                            let ix = xx as isize + kx as isize - pad;
                            if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize {
                                continue;
                            }
                            for i in 0..cin {
                                acc += x.at(n, iy as usize, ix as usize, i) * wt.data()[((ky * k + kx) * cin + i) * cout + o];
                            }
                        }
                    }
                    out.set(n, y, xx, o, acc);
                }
            }
        }
    }
    out
}

pub fn concat(maps: &[&Map]) -> Map {
    let c: usize = maps.iter().map(|m| m.c).sum();
    let f = maps[0];
    let mut out = Map::zeros(f.n, f.h, f.w, c);
    for n in 0..f.n {
        for y in 0..f.h {
            for x in 0..f.w {
                let mut o = 0;
                for m in maps {
                    for ch in 0..m.c {
                        out.set(n, y, x, o, m.at(n, y, x, ch));
                        o += 1;
                    }
                }
            }
        }
    }
    out
}

/// Channel `ch` moves to `(ch mod g) * (C / g) + ch div g`.
pub fn shuffle(m: &Map, g: usize) -> Map {
    let mut out = m.clone();
    let per = m.c / g;
    for n in 0..m.n {
        for y in 0..m.h {
            for x in 0..m.w {
                for ch in 0..m.c {
                    out.set(n, y, x, (ch % g) * per + ch / g, m.at(n, y, x, ch));
                }
            }
        }
    }
    out
}

pub fn channels(m: &Map, start: usize, len: usize) -> Map {
    let mut out = Map::zeros(m.n, m.h, m.w, len);
    for n in 0..m.n {
        for y in 0..m.h {
            for x in 0..m.w {
                for ch in 0..len {
                    out.set(n, y, x, ch, m.at(n, y, x, start + ch));
                }
            }
        }
    }
    out
}

/// Global pooling over positions, `[N,1,1,C]`.
pub fn pool_positions(m: &Map, max: bool) -> Map {
    let mut out = Map::zeros(m.n, 1, 1, m.c);
    for n in 0..m.n {
        for ch in 0..m.c {
            let mut acc = if max { f64::NEG_INFINITY } else { 0.0 };
            for y in 0..m.h {
                for x in 0..m.w {
                    let v = m.at(n, y, x, ch);
                    acc = if max { acc.max(v) } else { acc + v };
                }
            }
            if !max {
                acc /= (m.h * m.w) as f64;
            }
            out.set(n, 0, 0, ch, acc);
        }
    }
    out
}

/// Pooling over channels, `[N,H,W,1]`.
pub fn pool_channels(m: &Map, max: bool) -> Map {
    let mut out = Map::zeros(m.n, m.h, m.w, 1);
    for n in 0..m.n {
        for y in 0..m.h {
            for x in 0..m.w {
                let mut acc = if max { f64::NEG_INFINITY } else { 0.0 };
                for ch in 0..m.c {
                    let v = m.at(n, y, x, ch);
                    acc = if max { acc.max(v) } else { acc + v };
                }
                if !max {
                    acc /= m.c as f64;
                }
                out.set(n, y, x, 0, acc);
            }
        }
    }
    out
}

/// Value of `g` at a broadcast position (size-1 axes repeat).
fn bget(g: &Map, n: usize, y: usize, x: usize, c: usize) -> f64 {
    let pick = |i: usize, len: usize| if len == 1 { 0 } else { i };
    g.at(pick(n, g.n), pick(y, g.h), pick(x, g.w), pick(c, g.c))
}

/// `f + a * f + b * other` with broadcast gates.
fn exchange(f: &Map, other: &Map, a: &Map, b: &Map) -> Map {
    let mut out = f.clone();
    for n in 0..f.n {
        for y in 0..f.h {
            for x in 0..f.w {
                for c in 0..f.c {
                    let v = f.at(n, y, x, c) + bget(a, n, y, x, c) * f.at(n, y, x, c) + bget(b, n, y, x, c) * other.at(n, y, x, c);
                    out.set(n, y, x, c, v);
                }
            }
        }
    }
    out
}

fn pair(x: &Map, store: &ParamStore, prefix: &str, mid: fn(f64) -> f64, last: fn(f64) -> f64) -> Map {
    let y = conv(x, store, &format!("{prefix}_a")).map(mid);
    conv(&y, store, &format!("{prefix}_b")).map(last)
}

pub struct MmfiRef {
    pub fc_tfi: Map,
    pub fc_zc: Map,
    pub fs_tfi: Map,
    pub fs_zc: Map,
}

pub fn mmfi_ref(store: &ParamStore, t: &Map, z: &Map) -> MmfiRef {
    let (f1, f2) = (pool_positions(t, false), pool_positions(t, true));
    let (f3, f4) = (pool_positions(z, false), pool_positions(z, true));
    let f5 = conv(&concat(&[&f1, &f2]), store, "mmfi.f5").map(sigmoid);
    let f6 = conv(&concat(&[&f3, &f4]), store, "mmfi.f6").map(sigmoid);
    let f7 = pair(&shuffle(&concat(&[&f1, &f2, &f3, &f4]), 4), store, "mmfi.f7", relu, sigmoid);

    let (s1, s2) = (pool_channels(t, false), pool_channels(t, true));
    let (s3, s4) = (pool_channels(z, false), pool_channels(z, true));
    let f8 = conv(&concat(&[&s1, &s2]), store, "mmfi.f8").map(sigmoid);
    let f9 = conv(&concat(&[&s3, &s4]), store, "mmfi.f9").map(sigmoid);
    let f10 = pair(&shuffle(&concat(&[&s1, &s2, &s3, &s4]), 4), store, "mmfi.f10", relu, sigmoid);
    MmfiRef {
        fc_tfi: exchange(t, z, &f5, &f7),
        fc_zc: exchange(z, t, &f6, &f7),
        fs_tfi: exchange(t, z, &f8, &f10),
        fs_zc: exchange(z, t, &f9, &f10),
    }
}

pub fn smff_ref(store: &ParamStore, prefix: &str, fc: &Map, fs: &Map) -> Map {
    let mix = shuffle(&concat(&[fc, fs]), 2);
    let f11 = pair(&pool_positions(&mix, false), store, &format!("{prefix}.f11"), relu, sigmoid);
    let f12 = pair(&mix, store, &format!("{prefix}.f12"), relu, sigmoid);
    let mut a = fc.clone();
    let mut b = fs.clone();
    for n in 0..fc.n {
        for y in 0..fc.h {
            for x in 0..fc.w {
                for c in 0..fc.c {
                    let f13 = f12.at(n, y, x, c) * f11.at(n, 0, 0, c);
                    a.set(n, y, x, c, f13 * fc.at(n, y, x, c));
                    b.set(n, y, x, c, f13 * fs.at(n, y, x, c));
                }
            }
        }
    }
    conv(&concat(&[&a, &b]), store, &format!("{prefix}.ff"))
}

/// Attention weights of both halves, `[N][HW][HW]`, and the fused map.
pub struct MmffRef {
    pub aw_tfi: Vec<Vec<Vec<f64>>>,
    pub aw_zc: Vec<Vec<Vec<f64>>>,
    pub fused: Map,
}

fn attend(q: &Map, k: &Map, v: &Map) -> (Vec<Vec<Vec<f64>>>, Map) {
    let hw = q.h * q.w;
    let d = q.c;
    let mut aws = Vec::new();
    let mut out = Map::zeros(q.n, q.h, q.w, d);
    for n in 0..q.n {
        let pos = |i: usize| (i / q.w, i % q.w);
        let mut aw = vec![vec![0.0; hw]; hw];
        for i in 0..hw {
            let (yi, xi) = pos(i);
            let mut row: Vec<f64> = (0..hw)
                .map(|j| {
                    let (yj, xj) = pos(j);
                    (0..d).map(|c| q.at(n, yi, xi, c) * k.at(n, yj, xj, c)).sum::<f64>() / d as f64
                })
                .collect();
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|s| (s - m).exp()).sum();
            row.iter_mut().for_each(|s| *s = (*s - m).exp() / z);
            for c in 0..d {
                let val: f64 = (0..hw)
                    .map(|j| {
                        let (yj, xj) = pos(j);
                        row[j] * v.at(n, yj, xj, c)
                    })
                    .sum();
                out.set(n, yi, xi, c, val);
            }
            aw[i] = row;
        }
        aws.push(aw);
    }
    (aws, out)
}

pub fn mmff_ref(store: &ParamStore, t: &Map, z: &Map) -> MmffRef {
    let d = t.c / 4;
    let proj = |name: &str, x: &Map| conv(x, store, name);
    let halves = |a: Map, b: Map| {
        let mixed = shuffle(&concat(&[&a, &b]), 2);
        (channels(&mixed, 0, d), channels(&mixed, d, d))
    };
    let (k1, k2) = halves(proj("mmff.k_tfi", t), proj("mmff.k_zc", z));
    let (q1, q2) = halves(proj("mmff.q_tfi", t), proj("mmff.q_zc", z));
    let (v1, v2) = halves(proj("mmff.v_tfi", t), proj("mmff.v_zc", z));
    let (aw_tfi, f15) = attend(&q1, &k1, &v1);
    let (aw_zc, f16) = attend(&q2, &k2, &v2);
    let mixed = shuffle(&concat(&[&f15, &f16]), 2);
    let fused = pair(&mixed, store, "mmff.out", relu, |x| x);
    MmffRef { aw_tfi, aw_zc, fused }
}

/// Spatial weight `[H*W]` and channel weight `[D]`.
pub fn afw_weights_ref(store: &ParamStore, stats: &ClassStats) -> (Vec<f64>, Vec<f64>) {
    let sc = |n: &str| store.value(n).unwrap().data()[0];
    let alpha = sc("afw.alpha");
    let w = |s: &[f64], v: &[f64], a: f64, b: f64| -> Vec<f64> {
        s.iter()
            .zip(v)
            .map(|(s, v)| {
                let w = alpha * s - (1.0 - alpha) * v;
                sigmoid(-a * w + b)
            })
            .collect()
    };
    (
        w(&stats.s_s, &stats.v_s, sc("afw.a_s"), sc("afw.b_s")),
        w(&stats.s_c, &stats.v_c, sc("afw.a_c"), sc("afw.b_c")),
    )
}

pub fn afw_ref(store: &ParamStore, f: &Map, stats: &ClassStats, spatial: bool, channel: bool) -> Map {
    let (ws, wc) = afw_weights_ref(store, stats);
    let mut out = f.clone();
    for n in 0..f.n {
        for y in 0..f.h {
            for x in 0..f.w {
                for c in 0..f.c {
                    let mut v = f.at(n, y, x, c);
                    if spatial {
                        v *= ws[y * f.w + x];
                    }
                    if channel {
                        v *= wc[c];
                    }
                    out.set(n, y, x, c, v);
                }
            }
        }
    }
    out
}

/// Class statistics from class-mean maps, recomputed without the library.
pub struct StatsRef {
    pub s_s: Vec<f64>,
    pub v_s: Vec<f64>,
    pub s_c: Vec<f64>,
    pub v_c: Vec<f64>,
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

fn pairwise_mean(vs: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut k = 0.0;
    for i in 0..vs.len() {
        for j in 0..i {
            s += cos(&vs[i], &vs[j]);
            k += 1.0;
        }
    }
    s / k
}

fn var(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn stats_ref(means: &[Vec<f64>], h: usize, w: usize, d: usize) -> StatsRef {
    let at = |p: usize, y: usize, x: usize, c: usize| means[p][(y * w + x) * d + c];
    let ms = |p: usize, y: usize, x: usize| (0..d).map(|c| at(p, y, x, c)).sum::<f64>() / d as f64;
    let mut r = StatsRef {
        s_s: vec![],
        v_s: vec![],
        s_c: vec![],
        v_c: vec![],
    };
    for y in 0..h {
        for x in 0..w {
            let hoods: Vec<Vec<f64>> = (0..means.len())
                .map(|p| {
                    let mut v = vec![];
                    for yy in [y.saturating_sub(1), y, (y + 1).min(h - 1)] {
                        for xx in [x.saturating_sub(1), x, (x + 1).min(w - 1)] {
                            v.push(ms(p, yy, xx));
                        }
                    }
                    v
                })
                .collect();
            r.s_s.push(pairwise_mean(&hoods));
            r.v_s.push(var(&(0..means.len()).map(|p| ms(p, y, x)).collect::<Vec<_>>()));
        }
    }
    for c in 0..d {
        let maps: Vec<Vec<f64>> = (0..means.len())
            .map(|p| (0..h * w).map(|q| at(p, q / w, q % w, c)).collect())
            .collect();
        r.s_c.push(pairwise_mean(&maps));
        let mc: Vec<f64> = maps.iter().map(|m| m.iter().sum::<f64>() / m.len() as f64).collect();
        r.v_c.push(var(&mc));
    }
    r
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
