//! Named parameter storage shared by the discriminator, policy, and
//! classifier, plus the weight initializers.
//!
//! A `ParamSet` owns the tensors in creation order; models keep typed
//! `ParamId` handles. Attaching a set to a graph yields one leaf per
//! parameter, and gradients map back to parameters by that same order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Gradients, Scalar, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Clone, Debug)]
pub struct ParamSet<T: Scalar> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor<T>) -> ParamId {
        self.entries.push((name.into(), t));
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].1
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Total scalar parameter count.
    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn tensors(&self) -> Vec<Tensor<T>> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    /// Replaces all tensors, preserving names; shapes must match.
    pub fn set_tensors(&mut self, tensors: Vec<Tensor<T>>) {
        assert_eq!(tensors.len(), self.entries.len());
        for ((_, slot), t) in self.entries.iter_mut().zip(tensors) {
            assert_eq!(slot.shape(), t.shape(), "parameter shape changed");
            *slot = t;
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.cast::<U>()))
                .collect(),
        }
    }

    /// Creates one graph leaf per parameter, in storage order.
    pub fn attach(&self, g: &mut Graph<T>, requires_grad: bool) -> AttachedParams {
        AttachedParams {
            vars: self
                .entries
                .iter()
                .map(|(_, t)| g.leaf(t.clone(), requires_grad))
                .collect(),
        }
    }
}

/// Graph leaves for one attached `ParamSet`, indexable by `ParamId`.
pub struct AttachedParams {
    vars: Vec<Var>,
}

impl AttachedParams {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Collects gradients back into storage order; absent entries are zero.
    pub fn collect_grads<T: Scalar>(
        &self,
        set: &ParamSet<T>,
        grads: &Gradients<T>,
    ) -> Vec<Tensor<T>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(i, v)| {
                grads
                    .get(*v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(set.entries[i].1.shape().to_vec()))
            })
            .collect()
    }
}

/// Uniform init scaled by fan-in: `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn uniform_fan_in<T: Scalar>(
    rng: &mut ChaCha8Rng,
    shape: Vec<usize>,
    fan_in: usize,
) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(shape, data)
}

pub fn zeros_init<T: Scalar>(shape: Vec<usize>) -> Tensor<T> {
    Tensor::zeros(shape)
}
