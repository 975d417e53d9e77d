use serde::{Deserialize, Serialize};

use crate::tensor::{nhwc, sigmoid, Graph, ParamStore, Tensor, Var};
use crate::{Error, Result};

/// Per-class statistics of the fused map and the discrimination scores
/// derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_count: usize,
    pub height: usize,
    pub width: usize,
    pub depth: usize,
    /// Class spatial means, `P x H x W` (mean over samples and channels).
    pub m_s: Vec<f64>,
    /// Class channel means, `P x D` (mean over samples and positions).
    pub m_c: Vec<f64>,
    /// Spatial similarity and variance, `H x W`.
    pub s_s: Vec<f64>,
    pub v_s: Vec<f64>,
    /// Channel similarity and variance, `D`.
    pub s_c: Vec<f64>,
    pub v_c: Vec<f64>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na * nb > 0.0 {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    } else if a == b {
        1.0
    } else {
        0.0
    }
}

/// Mean cosine similarity over all class pairs.
fn mean_pairwise_cosine(vectors: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            s += cosine(&vectors[i], &vectors[j]);
            n += 1;
        }
    }
    s / n as f64
}

fn population_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - m).powi(2)).sum::<f64>() / n
}

impl ClassStats {
    /// Statistics from class-mean maps, `P` maps of `H x W x D` each.
    ///
    /// Spatial similarity at (h, w) compares, for every class pair, the 3x3
    /// neighbourhood (edge-replicated) of the class spatial means around
    /// (h, w). Channel similarity at d compares the classes' `H x W` mean maps
    /// of channel d. Variances are population variances of the class means.
    pub fn from_class_means(means: &[Vec<f64>], height: usize, width: usize, depth: usize) -> Result<Self> {
        let p = means.len();
        if p < 2 {
            return Err(Error::diag(format!("class similarity needs at least two classes, got {p}")));
        }
        let hw = height * width;
        if hw == 0 || depth == 0 {
            return Err(Error::param("empty fused map"));
        }
        if let Some(bad) = means.iter().find(|m| m.len() != hw * depth) {
            return Err(Error::param(format!("class mean has {} values, expected {}", bad.len(), hw * depth)));
        }
        let m_s: Vec<f64> = means
            .iter()
            .flat_map(|m| m.chunks(depth).map(|px| px.iter().sum::<f64>() / depth as f64).collect::<Vec<_>>())
            .collect();
        let m_c: Vec<f64> = means
            .iter()
            .flat_map(|m| (0..depth).map(move |d| (0..hw).map(|q| m[q * depth + d]).sum::<f64>() / hw as f64))
            .collect();

        let mut s_s = Vec::with_capacity(hw);
        let mut v_s = Vec::with_capacity(hw);
        for y in 0..height {
            for x in 0..width {
                let hoods: Vec<Vec<f64>> = (0..p)
                    .map(|c| {
                        let mut v = Vec::with_capacity(9);
                        for dy in -1isize..=1 {
                            for dx in -1isize..=1 {
                                let yy = (y as isize + dy).clamp(0, height as isize - 1) as usize;
                                let xx = (x as isize + dx).clamp(0, width as isize - 1) as usize;
                                v.push(m_s[c * hw + yy * width + xx]);
                            }
                        }
                        v
                    })
                    .collect();
                s_s.push(mean_pairwise_cosine(&hoods));
                v_s.push(population_variance((0..p).map(|c| m_s[c * hw + y * width + x])));
            }
        }
        let mut s_c = Vec::with_capacity(depth);
        let mut v_c = Vec::with_capacity(depth);
        for d in 0..depth {
            let maps: Vec<Vec<f64>> = means.iter().map(|m| (0..hw).map(|q| m[q * depth + d]).collect()).collect();
            s_c.push(mean_pairwise_cosine(&maps));
            v_c.push(population_variance((0..p).map(|c| m_c[c * depth + d])));
        }
        Ok(Self {
            class_count: p,
            height,
            width,
            depth,
            m_s,
            m_c,
            s_s,
            v_s,
            s_c,
            v_c,
        })
    }

    /// `W = alpha * S - (1 - alpha) * V` over positions.
    pub fn w_spatial(&self, alpha: f64) -> Vec<f64> {
        self.s_s.iter().zip(&self.v_s).map(|(s, v)| alpha * s - (1.0 - alpha) * v).collect()
    }

    /// `W = alpha * S - (1 - alpha) * V` over channels.
    pub fn w_channel(&self, alpha: f64) -> Vec<f64> {
        self.s_c.iter().zip(&self.v_c).map(|(s, v)| alpha * s - (1.0 - alpha) * v).collect()
    }

    /// `self = momentum * self + (1 - momentum) * new`.
    pub fn blend(&mut self, new: &ClassStats, momentum: f64) -> Result<()> {
        if (self.class_count, self.height, self.width, self.depth) != (new.class_count, new.height, new.width, new.depth) {
            return Err(Error::param("class statistics of different shapes"));
        }
        let mix = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x = momentum * *x + (1.0 - momentum) * y);
        mix(&mut self.m_s, &new.m_s);
        mix(&mut self.m_c, &new.m_c);
        mix(&mut self.s_s, &new.s_s);
        mix(&mut self.v_s, &new.v_s);
        mix(&mut self.s_c, &new.s_c);
        mix(&mut self.v_c, &new.v_c);
        Ok(())
    }
}

/// Running per-class sums of fused maps.
#[derive(Debug, Clone)]
pub struct ClassAccumulator {
    height: usize,
    width: usize,
    depth: usize,
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl ClassAccumulator {
    pub fn new(class_count: usize, height: usize, width: usize, depth: usize) -> Self {
        Self {
            height,
            width,
            depth,
            sums: vec![vec![0.0; height * width * depth]; class_count],
            counts: vec![0; class_count],
        }
    }

    /// Adds a batch `[N,H,W,D]` with one label per sample.
    pub fn add_batch(&mut self, maps: &Tensor, labels: &[usize]) -> Result<()> {
        let (n, h, w, d) = nhwc(maps.shape(), "class accumulator")?;
        if (h, w, d) != (self.height, self.width, self.depth) || n != labels.len() {
            return Err(Error::param(format!("accumulator batch {:?} with {} labels", maps.shape(), labels.len())));
        }
        let per = h * w * d;
        for (i, &l) in labels.iter().enumerate() {
            let sum = self
                .sums
                .get_mut(l)
                .ok_or_else(|| Error::param(format!("label {l} outside {} classes", self.counts.len())))?;
            sum.iter_mut().zip(&maps.data()[i * per..(i + 1) * per]).for_each(|(a, b)| *a += b);
            self.counts[l] += 1;
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<ClassStats> {
        if let Some(empty) = self.counts.iter().position(|c| *c == 0) {
            return Err(Error::diag(format!("class {empty} has no samples for the weighting statistics")));
        }
        let means: Vec<Vec<f64>> = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| s.iter().map(|v| v / c as f64).collect())
            .collect();
        ClassStats::from_class_means(&means, self.height, self.width, self.depth)
    }
}

/// `sigma(a * (-w) + b)`: low similarity and high variance give high weight.
pub fn omega(w: f64, a: f64, b: f64) -> f64 {
    sigmoid(-a * w + b)
}

pub fn init_afw(store: &mut ParamStore, alpha: f64) -> Result<()> {
    store.insert("afw.alpha", Tensor::scalar(alpha), true)?;
    for n in ["afw.a_s", "afw.a_c"] {
        store.insert(n, Tensor::scalar(1.0), true)?;
    }
    for n in ["afw.b_s", "afw.b_c"] {
        store.insert(n, Tensor::scalar(0.0), true)?;
    }
    Ok(())
}

/// `sigma(a * -(alpha (S + V) - V) + b)` as a graph node of `shape`.
fn weight_node(g: &mut Graph, store: &ParamStore, s: &[f64], v: &[f64], shape: &[usize], tag: &str) -> Result<Var> {
    let alpha = g.param(store, "afw.alpha")?;
    let a = g.param(store, &format!("afw.a_{tag}"))?;
    let b = g.param(store, &format!("afw.b_{tag}"))?;
    let sv = g.constant(Tensor::new(shape, s.iter().zip(v).map(|(s, v)| s + v).collect())?);
    let vv = g.constant(Tensor::new(shape, v.to_vec())?);
    let w = g.mul_scalar(sv, alpha)?;
    let w = g.sub(w, vv)?;
    g.tap(&format!("afw.w_{tag}"), w);
    let z = g.scale(w, -1.0)?;
    let z = g.mul_scalar(z, a)?;
    let z = g.add_scalar(z, b)?;
    let om = g.sigmoid(z);
    g.tap(&format!("afw.omega_{tag}"), om);
    Ok(om)
}

/// Scales `f: [N,H,W,D]` by the spatial weight `[H,W]` and/or the channel
/// weight `[D]` derived from frozen class statistics.
pub fn afw_apply(
    g: &mut Graph,
    store: &ParamStore,
    f: Var,
    stats: &ClassStats,
    spatial: bool,
    channel: bool,
) -> Result<Var> {
    let (_, h, w, d) = nhwc(g.shape(f), "afw")?;
    if (h, w, d) != (stats.height, stats.width, stats.depth) {
        return Err(Error::param(format!(
            "weighting statistics are {}x{}x{}, map is {h}x{w}x{d}",
            stats.height, stats.width, stats.depth
        )));
    }
    let mut out = f;
    if spatial {
        let om = weight_node(g, store, &stats.s_s, &stats.v_s, &[1, h, w, 1], "s")?;
        out = g.mul_bcast(out, om)?;
    }
    if channel {
        let om = weight_node(g, store, &stats.s_c, &stats.v_c, &[1, 1, 1, d], "c")?;
        out = g.mul_bcast(out, om)?;
    }
    Ok(out)
}
