use rand::seq::index::sample;
use rand::Rng;

use super::{Graph, Mode, ParamStore, Tensor, Var};
use crate::{Error, Result};

/// Initial central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

/// Differences below this are central-difference roundoff and count as
/// agreement (a gradient that is exactly zero has a numeric estimate of
/// order `eps * |f| / FD_STEP`).
pub const ABS_TOL: f64 = 1e-9;

/// Loss roundoff in units of `eps * max(|f|, 1)`. Sums over many terms carry
/// a few ulps of error; this allows four times the largest seen.
const ROUNDOFF_ULPS: f64 = 16.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`,
    /// with differences within the roundoff of the difference quotient (and
    /// at least up to [`ABS_TOL`]) counted as zero.
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates whose one-sided slopes disagree at every step, i.e. each
    /// step crossed a kink (relu, clamp, max). They are left out of
    /// `max_rel_err`.
    pub kinks: usize,
    /// Where `max_rel_err` was found: (input or parameter, flat index).
    pub worst: Option<(String, usize)>,
}

/// Steps tried in turn while a kink inside the step may explain the error.
const FD_STEPS: [f64; 3] = [FD_STEP, FD_STEP / 10.0, FD_STEP / 100.0];

/// One-sided slopes agreeing to this fraction of the gradient scale bound the
/// error a kink inside the step can cause (half their gap) to a tenth of the
/// 1e-4 tolerance.
const SLOPE_AGREEMENT: f64 = 1e-5;

/// Gap between one-sided slopes, relative to the larger one, beyond which a
/// step is taken to straddle a kink.
const KINK_GAP: f64 = 1e-3;

struct Estimate {
    err: f64,
    /// `|up - down| / 2` beyond roundoff, the largest central error a kink
    /// can cause.
    slope_gap: f64,
    scale: f64,
    kinked: bool,
}

fn estimate(analytic: f64, f0: f64, h: f64, fp: f64, fm: f64) -> Estimate {
    let numeric = (fp - fm) / (2.0 * h);
    let (up, down) = ((fp - f0) / h, (f0 - fm) / h);
    let scale = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    // Slope resolution of a difference quotient with step h.
    let noise = (ROUNDOFF_ULPS * f64::EPSILON * f0.abs().max(1.0) / h).max(ABS_TOL);
    let diff = (analytic - numeric).abs();
    let gap = (up - down).abs();
    Estimate {
        err: if diff <= noise { 0.0 } else { diff / scale },
        slope_gap: (gap / 2.0 - noise).max(0.0),
        scale,
        kinked: gap > KINK_GAP * up.abs().max(down.abs()).max(REL_FLOOR) + 2.0 * noise,
    }
}

impl GradCheckReport {
    /// Checks one coordinate. `eval(h)` is the loss with the coordinate moved
    /// by `h`. When the slopes on the two sides disagree the step is shrunk.
    /// If they disagree at every step, the step with the smallest gap (least
    /// kink, curvature and roundoff) is used, and the coordinate counts as a
    /// kink when even that step straddles one.
    fn probe(&mut self, what: &str, idx: usize, analytic: f64, f0: f64, mut eval: impl FnMut(f64) -> Result<f64>) -> Result<()> {
        let mut best: Option<Estimate> = None;
        for h in FD_STEPS {
            let e = estimate(analytic, f0, h, eval(h)?, eval(-h)?);
            if e.err <= 1e-6 || e.slope_gap <= SLOPE_AGREEMENT * e.scale {
                self.accept(what, idx, e.err);
                return Ok(());
            }
            if best.as_ref().is_none_or(|b| e.slope_gap / e.scale < b.slope_gap / b.scale) {
                best = Some(e);
            }
        }
        let e = best.expect("at least one step");
        if e.kinked {
            self.kinks += 1;
        } else {
            self.accept(what, idx, e.err);
        }
        Ok(())
    }

    fn accept(&mut self, what: &str, idx: usize, err: f64) {
        self.checked += 1;
        if err > self.max_rel_err {
            self.max_rel_err = err;
            self.worst = Some((what.to_string(), idx));
        }
    }
}

fn scalar(g: &Graph, v: Var) -> Result<f64> {
    match g.value(v).data() {
        [x] => Ok(*x),
        d => Err(Error::param(format!("gradient check needs a scalar loss, got {} values", d.len()))),
    }
}

fn coords<R: Rng + ?Sized>(len: usize, limit: Option<usize>, rng: &mut R) -> Vec<usize> {
    match limit {
        Some(k) if k < len => {
            let mut v = sample(rng, len, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..len).collect(),
    }
}

/// Compares reverse-mode gradients of the scalar `f(inputs)` with central
/// differences, for every input coordinate or `limit` random ones per input.
pub fn grad_check<R, F>(inputs: &[Tensor], mode: Mode, limit: Option<usize>, rng: &mut R, f: F) -> Result<GradCheckReport>
where
    R: Rng + ?Sized,
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new(mode);
        let vars: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let out = f(&mut g, &vars)?;
        scalar(&g, out)
    };
    let mut g = Graph::new(mode);
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let loss = f(&mut g, &vars)?;
    let f0 = scalar(&g, loss)?;
    g.backward(loss)?;

    let mut report = GradCheckReport::default();
    let mut xs = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = g.grad(*v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        for j in coords(inputs[i].len(), limit, rng) {
            let orig = xs[i].data()[j];
            report.probe(&format!("input {i}"), j, analytic[j], f0, |h| {
                xs[i].data_mut()[j] = orig + h;
                let v = eval(&xs);
                xs[i].data_mut()[j] = orig;
                v
            })?;
        }
    }
    Ok(report)
}

/// Same comparison for the trainable parameters of `store` whose names start
/// with one of `prefixes` (all when empty), `limit` coordinates per tensor.
pub fn grad_check_params<R, F>(
    store: &ParamStore,
    prefixes: &[&str],
    mode: Mode,
    limit: Option<usize>,
    rng: &mut R,
    f: F,
) -> Result<GradCheckReport>
where
    R: Rng + ?Sized,
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut g = Graph::new(mode);
    let loss = f(&mut g, store)?;
    let f0 = scalar(&g, loss)?;
    g.backward(loss)?;
    let mut grads = ParamStore::clone(store);
    grads.zero_grad();
    g.accumulate_grads(&mut grads)?;

    let names: Vec<String> = store
        .iter()
        .filter(|(n, p)| p.trainable && (prefixes.is_empty() || prefixes.iter().any(|pre| n.starts_with(pre))))
        .map(|(n, _)| n.to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::param("no trainable parameter matches the requested prefixes"));
    }
    let mut work = store.clone();
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(mode);
        let out = f(&mut g, s)?;
        scalar(&g, out)
    };
    let mut report = GradCheckReport::default();
    for name in &names {
        let analytic = grads.get(name).map(|p| p.grad.clone()).unwrap_or_default();
        for j in coords(analytic.len(), limit, rng) {
            let orig = work.value(name)?.data()[j];
            report.probe(name, j, analytic[j], f0, |h| {
                work.get_mut(name).expect("present").value.data_mut()[j] = orig + h;
                let v = eval(&work);
                work.get_mut(name).expect("present").value.data_mut()[j] = orig;
                v
            })?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn detects_a_wrong_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap();
        let ok = grad_check(std::slice::from_ref(&x), Mode::Eval, None, &mut rng, |g, v| {
            let y = g.mul(v[0], v[0])?;
            Ok(g.sum(y))
        })
        .unwrap();
        assert!(ok.max_rel_err < 1e-7 && ok.checked == 3);

        // A node claiming d(x^2)/dx = x.
        let bad = grad_check(&[x], Mode::Eval, None, &mut rng, |g, v| {
            let val = g.value(v[0]).data().iter().map(|a| a * a).collect();
            let t = Tensor::new(&[3], val)?;
            let y = g.push(t, &[v[0]], Box::new(|gr, _, ins| vec![Some(gr.iter().zip(ins[0].data()).map(|(g, x)| g * x).collect())]));
            Ok(g.sum(y))
        })
        .unwrap();
        assert!(bad.max_rel_err > 0.4);
    }

    #[test]
    fn kinks_are_set_aside() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::new(&[2], vec![1e-9, 1.0]).unwrap();
        let r = grad_check(&[x], Mode::Eval, None, &mut rng, |g, v| {
            let y = g.relu(v[0]);
            Ok(g.sum(y))
        })
        .unwrap();
        assert_eq!((r.kinks, r.checked), (1, 1));
        assert!(r.max_rel_err < 1e-8);
    }

    #[test]
    fn a_kink_near_the_point_is_resolved_by_a_smaller_step() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        // The kink lies within the first step but outside the last.
        let x = Tensor::new(&[1], vec![3e-6]).unwrap();
        let r = grad_check(&[x], Mode::Eval, None, &mut rng, |g, v| {
            let y = g.relu(v[0]);
            Ok(g.sum(y))
        })
        .unwrap();
        assert_eq!((r.kinks, r.checked), (0, 1));
        assert!(r.max_rel_err < 1e-8);
    }

    #[test]
    fn a_wrong_gradient_at_a_kink_free_point_is_not_hidden() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        // Strong curvature: exp(50 x) with a gradient off by 1%.
        let x = Tensor::new(&[1], vec![0.1]).unwrap();
        let r = grad_check(&[x], Mode::Eval, None, &mut rng, |g, v| {
            let val = g.value(v[0]).data().iter().map(|a| (50.0 * a).exp()).collect();
            let t = Tensor::new(&[1], val)?;
            let y = g.push(t, &[v[0]], Box::new(|gr, out, _| vec![Some(gr.iter().zip(out.data()).map(|(g, y)| g * 49.5 * y).collect())]));
            Ok(g.sum(y))
        })
        .unwrap();
        assert_eq!(r.kinks, 0);
        assert!(r.max_rel_err > 5e-3);
    }

    #[test]
    fn a_large_loss_offset_neither_fails_nor_hides_errors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::new(&[2], vec![3e-3, -2e-3]).unwrap();
        let offset = |g: &mut Graph, y: Var| {
            let c = g.leaf(Tensor::new(&[1], vec![1e3]).unwrap());
            let s = g.sum(y);
            g.add(s, c)
        };
        let ok = grad_check(std::slice::from_ref(&x), Mode::Eval, None, &mut rng, |g, v| {
            let y = g.mul(v[0], v[0])?;
            offset(g, y)
        })
        .unwrap();
        assert!(ok.max_rel_err < 1e-4 && ok.kinks == 0);

        // Claims d(x^2)/dx = 2.2 x.
        let bad = grad_check(&[x], Mode::Eval, None, &mut rng, |g, v| {
            let val = g.value(v[0]).data().iter().map(|a| a * a).collect();
            let t = Tensor::new(&[2], val)?;
            let y = g.push(t, &[v[0]], Box::new(|gr, _, ins| vec![Some(gr.iter().zip(ins[0].data()).map(|(g, x)| g * 2.2 * x).collect())]));
            offset(g, y)
        })
        .unwrap();
        assert!(bad.max_rel_err > 0.05);
    }
}
