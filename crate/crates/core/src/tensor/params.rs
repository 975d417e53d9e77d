use std::collections::BTreeMap;

use rand::Rng;

use super::Tensor;
use crate::{Error, Result};

/// A named tensor with its gradient buffer. Non-trainable entries are
/// buffers (normalization running statistics) and never receive gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Vec<f64>,
    pub trainable: bool,
}

/// All parameters and buffers of a model, ordered by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::config(format!("parameter '{name}' defined twice")));
        }
        let grad = vec![0.0; value.len()];
        self.params.insert(
            name.to_string(),
            Param {
                value,
                grad,
                trainable,
            },
        );
        Ok(())
    }

    /// Convolution kernel `[kh, kw, cin, cout]` with fan-in scaled normal
    /// entries, plus a zero bias `[cout]` when `bias` is set.
    pub fn init_conv<R: Rng + ?Sized>(
        &mut self,
        prefix: &str,
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<()> {
        let std = (2.0 / (kh * kw * cin) as f64).sqrt();
        self.insert(&format!("{prefix}.w"), Tensor::randn(&[kh, kw, cin, cout], std, rng), true)?;
        if bias {
            self.insert(&format!("{prefix}.b"), Tensor::zeros(&[cout]), true)?;
        }
        Ok(())
    }

    /// Depthwise kernel `[kh, kw, c]`.
    pub fn init_depthwise<R: Rng + ?Sized>(&mut self, prefix: &str, k: usize, c: usize, rng: &mut R) -> Result<()> {
        let std = (2.0 / (k * k) as f64).sqrt();
        self.insert(&format!("{prefix}.w"), Tensor::randn(&[k, k, c], std, rng), true)
    }

    /// Scale, shift and running statistics of a normalization layer.
    pub fn init_bn(&mut self, prefix: &str, c: usize) -> Result<()> {
        self.insert(&format!("{prefix}.gamma"), Tensor::full(&[c], 1.0), true)?;
        self.insert(&format!("{prefix}.beta"), Tensor::zeros(&[c]), true)?;
        self.insert(&format!("{prefix}.running_mean"), Tensor::zeros(&[c]), false)?;
        self.insert(&format!("{prefix}.running_var"), Tensor::full(&[c], 1.0), false)
    }

    /// Dense layer `[k, m]` weight and `[m]` bias.
    pub fn init_linear<R: Rng + ?Sized>(&mut self, prefix: &str, k: usize, m: usize, rng: &mut R) -> Result<()> {
        let std = (1.0 / k as f64).sqrt();
        self.insert(&format!("{prefix}.w"), Tensor::randn(&[k, m], std, rng), true)?;
        self.insert(&format!("{prefix}.b"), Tensor::zeros(&[m]), true)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::config(format!("missing parameter '{name}'")))
    }

    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::config(format!("missing parameter '{name}'")))?;
        if p.value.shape() != value.shape() {
            return Err(Error::param(format!(
                "parameter '{name}' has shape {:?}, new value {:?}",
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    pub(crate) fn add_grad(&mut self, name: &str, g: &[f64]) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::config(format!("missing parameter '{name}'")))?;
        if !p.trainable {
            return Ok(());
        }
        p.grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params.values().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    pub fn grads_finite(&self) -> bool {
        self.params.values().all(|p| p.grad.iter().all(|g| g.is_finite()))
    }
}
