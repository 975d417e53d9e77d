use std::collections::BTreeMap;

use super::{ParamStore, Tensor};
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

/// Gradient rule of one node: given the output gradient, the node's value and
/// its parents' values, returns one gradient per parent (`None` = no
/// contribution).
pub type BackFn = Box<dyn Fn(&[f64], &Tensor, &[&Tensor]) -> Vec<Option<Vec<f64>>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in normalization layers, running statistics updated.
    Train,
    /// Running statistics, no updates.
    Eval,
}

struct Node {
    value: Tensor,
    parents: Vec<Var>,
    backward: Option<BackFn>,
    requires_grad: bool,
}

/// A single-use computation tape. Ops append nodes in execution order, so the
/// node index order is a topological order for the backward sweep.
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    mode: Mode,
    params: BTreeMap<String, Var>,
    stat_updates: BTreeMap<String, Tensor>,
    taps: BTreeMap<String, Var>,
}

impl Graph {
    pub fn new(mode: Mode) -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            mode,
            params: BTreeMap::new(),
            stat_updates: BTreeMap::new(),
            taps: BTreeMap::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_train(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    /// Leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf holding the current value of parameter `name`. Repeated calls
    /// return the same node, so gradients of shared parameters accumulate.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        let p = store
            .get(name)
            .ok_or_else(|| Error::config(format!("missing parameter '{name}'")))?;
        let v = self.push_leaf(p.value.clone(), p.trainable);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// Appends an op node. The gradient rule is dropped when no parent needs
    /// a gradient.
    pub fn push(&mut self, value: Tensor, parents: &[Var], backward: BackFn) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            parents: parents.to_vec(),
            backward: requires_grad.then_some(backward),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a named intermediate for later inspection.
    pub fn tap(&mut self, name: &str, v: Var) {
        self.taps.insert(name.to_string(), v);
    }

    pub fn tapped(&self, name: &str) -> Option<&Tensor> {
        self.taps.get(name).map(|v| self.value(*v))
    }

    pub fn taps(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.taps.iter().map(|(k, v)| (k.as_str(), self.value(*v)))
    }

    /// Queues a new value for a non-trainable buffer (normalization running
    /// statistics). Applied by [`Graph::commit_stats`].
    pub(crate) fn queue_stat(&mut self, name: String, value: Tensor) {
        self.stat_updates.insert(name, value);
    }

    pub fn commit_stats(&mut self, store: &mut ParamStore) -> Result<()> {
        for (name, value) in std::mem::take(&mut self.stat_updates) {
            store.set_value(&name, value)?;
        }
        Ok(())
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let n = self.nodes[loss.0].value.len();
        if n != 1 {
            return Err(Error::param(format!("backward needs a scalar loss, got {n} values")));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::diag("loss is detached: no input requires a gradient"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(gout) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(back) = &node.backward {
                let inputs: Vec<&Tensor> = node.parents.iter().map(|p| &self.nodes[p.0].value).collect();
                let contribs = back(&gout, &node.value, &inputs);
                debug_assert_eq!(contribs.len(), node.parents.len());
                for (p, c) in node.parents.iter().zip(contribs) {
                    let (Some(c), true) = (c, self.nodes[p.0].requires_grad) else { continue };
                    match &mut grads[p.0] {
                        Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                        slot => *slot = Some(c),
                    }
                }
            }
            grads[i] = Some(gout);
        }
        self.grads = grads;
        Ok(())
    }

    /// Gradient of the last backward sweep with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the parameter gradients of the last sweep into `store`.
    pub fn accumulate_grads(&self, store: &mut ParamStore) -> Result<()> {
        for (name, v) in &self.params {
            if let Some(g) = self.grad(*v) {
                store.add_grad(name, g)?;
            }
        }
        Ok(())
    }

    pub fn param_grads(&self) -> impl Iterator<Item = (&str, Option<&[f64]>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), self.grad(*v)))
    }
}
