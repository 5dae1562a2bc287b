//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Graph`] is an append-only tape: every applied op appends one node and
//! eagerly computes its value. `backward` records the adjoint computation as
//! *new graph nodes* built from the same op catalogue, which is what makes
//! the gradient-penalty path twice-differentiable: [`Graph::input_gradient`]
//! returns the gradient as an ordinary [`Var`] that further ops (norms,
//! penalties) and a final `backward` can consume.
//!
//! Ops whose backward is a fused kernel (softmax, log-softmax) have no
//! second-order rule and report `SecondOrderUnsupported` if a gradient is
//! requested through their adjoints. That restriction matches what the
//! training objectives need: only the discriminator op subset (linear, conv,
//! bias, relu family, tanh, sums, norm) sits on the penalty path.
//!
//! Graphs are single-threaded; tensors are immutable values that can cross
//! threads freely. Run independent graphs in parallel, never one graph from
//! two threads.

pub mod adam;
pub mod op;
pub mod tensor;

mod vjp;

use std::collections::HashMap;

pub use adam::{adam_step, AdamParams, AdamState};
pub use op::{Conv2dSpec, Op};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unsupported op: {0}")]
    UnsupportedOp(String),
    #[error("backward called on a consumed graph")]
    GraphConsumed,
    #[error("op {0} has no second-order differentiation rule")]
    SecondOrderUnsupported(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("non-finite gradient; optimizer step aborted")]
    NonFiniteGradient,
}

/// Handle to a node in a [`Graph`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

struct Node<T: Scalar> {
    op: Op,
    inputs: Vec<usize>,
    value: Tensor<T>,
    requires_grad: bool,
}

/// Gradients keyed by the leaf [`Var`] they belong to.
#[derive(Debug)]
pub struct Gradients<T: Scalar> {
    map: HashMap<usize, Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.map.get(&v.0)
    }
}

pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts an externally-provided value as a leaf node.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(Tensor::scalar(T::from_f64(v)))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Applies an op to inputs, validating shapes and finiteness.
    pub fn apply(&mut self, op: Op, inputs: &[Var]) -> Result<Var, GraphError> {
        if matches!(op, Op::Leaf) {
            return Err(GraphError::UnsupportedOp(
                "leaf nodes are created via Graph::leaf".into(),
            ));
        }
        let shapes: Vec<&[usize]> = inputs.iter().map(|v| self.nodes[v.0].value.shape()).collect();
        op.infer_shape(&shapes)?;
        let tensors: Vec<&Tensor<T>> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = op.eval(&tensors);
        if !value.is_all_finite() {
            return Err(GraphError::NonFinite(format!("{op:?}")));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            inputs: inputs.iter().map(|v| v.0).collect(),
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    // ── convenience wrappers ─────────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.apply(Op::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.apply(Op::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.apply(Op::Mul, &[a, b])
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.apply(Op::Div, &[a, b])
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, GraphError> {
        self.apply(Op::Scale(c), &[a])
    }
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var, GraphError> {
        self.apply(Op::AddScalar(c), &[a])
    }
    pub fn mul_scalar_var(&mut self, a: Var, s: Var) -> Result<Var, GraphError> {
        self.apply(Op::MulScalarVar, &[a, s])
    }
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.apply(Op::Matmul, &[a, b])
    }
    pub fn transpose(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::Transpose, &[a])
    }
    pub fn conv2d(&mut self, x: Var, w: Var, spec: Conv2dSpec) -> Result<Var, GraphError> {
        self.apply(Op::Conv2d(spec), &[x, w])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::Relu, &[a])
    }
    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Result<Var, GraphError> {
        self.apply(Op::LeakyRelu(alpha), &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::Tanh, &[a])
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::Sigmoid, &[a])
    }
    pub fn softplus(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::Softplus, &[a])
    }
    /// Softmax over the last axis. Any other axis is unsupported.
    pub fn softmax(&mut self, a: Var, axis: isize) -> Result<Var, GraphError> {
        self.check_last_axis(a, axis, "softmax")?;
        self.apply(Op::Softmax, &[a])
    }
    pub fn log_softmax(&mut self, a: Var, axis: isize) -> Result<Var, GraphError> {
        self.check_last_axis(a, axis, "log_softmax")?;
        self.apply(Op::LogSoftmax, &[a])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::Sum, &[a])
    }
    pub fn mean(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::Mean, &[a])
    }
    pub fn sum_pool_spatial(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::SumPoolSpatial, &[a])
    }
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, GraphError> {
        self.apply(Op::Concat { axis }, parts)
    }
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, GraphError> {
        self.apply(Op::Slice { axis, start, len }, &[a])
    }
    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var, GraphError> {
        self.apply(
            Op::EmbeddingLookup {
                indices: indices.to_vec(),
            },
            &[table],
        )
    }
    pub fn bias_add(&mut self, x: Var, b: Var) -> Result<Var, GraphError> {
        self.apply(Op::BiasAdd, &[x, b])
    }
    pub fn l2_norm(&mut self, a: Var) -> Result<Var, GraphError> {
        self.apply(Op::L2Norm, &[a])
    }
    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var, GraphError> {
        self.apply(Op::Reshape { shape }, &[a])
    }

    fn check_last_axis(&self, a: Var, axis: isize, what: &str) -> Result<(), GraphError> {
        let rank = self.shape(a).len() as isize;
        let norm = if axis < 0 { rank + axis } else { axis };
        if norm != rank - 1 {
            return Err(GraphError::UnsupportedOp(format!(
                "{what} supports only the last axis (got {axis} for rank {rank})"
            )));
        }
        Ok(())
    }

    // ── differentiation ──────────────────────────────────────────────

    /// Gradient of a scalar `loss` with respect to every `requires_grad`
    /// leaf. Leaves that do not participate in `loss` receive zero tensors.
    /// Consumes the graph: a second call fails with `GraphConsumed`.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>, GraphError> {
        if self.consumed {
            return Err(GraphError::GraphConsumed);
        }
        self.consumed = true;
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(GraphError::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let targets: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i].op, Op::Leaf) && self.nodes[i].requires_grad)
            .collect();
        let adj = self.record_adjoints(loss, &targets)?;
        let mut map = HashMap::new();
        for t in targets {
            let g = match adj.get(&t) {
                Some(v) => self.nodes[v.0].value.clone(),
                None => Tensor::zeros(self.nodes[t].value.shape().to_vec()),
            };
            map.insert(t, g);
        }
        Ok(Gradients { map })
    }

    /// Records `d loss / d x` as a new graph node and returns it. The graph
    /// stays live: the result can feed further ops and a later `backward`.
    /// `x` must require grad (directly or transitively it is a leaf input).
    pub fn input_gradient(&mut self, loss: Var, x: Var) -> Result<Var, GraphError> {
        if self.consumed {
            return Err(GraphError::GraphConsumed);
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(GraphError::Shape(format!(
                "input_gradient needs a scalar, got {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let adj = self.record_adjoints(loss, &[x.0])?;
        match adj.get(&x.0) {
            Some(&v) => Ok(v),
            None => {
                let zero = Tensor::zeros(self.nodes[x.0].value.shape().to_vec());
                Ok(self.constant(zero))
            }
        }
    }

    /// Propagates adjoints from `loss` down to `targets`, appending the
    /// adjoint computations as graph nodes. Returns the adjoint var of each
    /// reached target.
    fn record_adjoints(
        &mut self,
        loss: Var,
        targets: &[usize],
    ) -> Result<HashMap<usize, Var>, GraphError> {
        let n = loss.0 + 1;
        // dep[i]: node i transitively depends on some target
        let mut dep = vec![false; self.nodes.len()];
        for &t in targets {
            dep[t] = true;
        }
        for i in 0..self.nodes.len() {
            if !dep[i] {
                let ins = &self.nodes[i].inputs;
                dep[i] = ins.iter().any(|&j| dep[j]);
            }
        }
        if !dep[loss.0] {
            return Ok(HashMap::new());
        }

        // contributions[i]: adjoint parts to be summed, in deterministic order
        let mut contributions: HashMap<usize, Vec<Var>> = HashMap::new();
        let one = self.constant(Tensor::scalar(T::ONE));
        contributions.insert(loss.0, vec![one]);
        let mut out = HashMap::new();

        for id in (0..n).rev() {
            if !dep[id] {
                continue;
            }
            let parts = match contributions.remove(&id) {
                Some(p) => p,
                None => continue,
            };
            let mut grad = parts[0];
            for p in &parts[1..] {
                grad = self.add(grad, *p)?;
            }
            if targets.contains(&id) {
                out.insert(id, grad);
                // leaves have no inputs; non-leaf targets still propagate
            }
            if matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[id].op.clone();
            let inputs = self.nodes[id].inputs.clone();
            let vjps = vjp::record(self, &op, &inputs, Var(id), grad)?;
            debug_assert_eq!(vjps.len(), inputs.len());
            for (inp, v) in inputs.iter().zip(vjps) {
                if let Some(v) = v {
                    if dep[*inp] {
                        debug_assert_eq!(
                            self.nodes[v.0].value.shape(),
                            self.nodes[*inp].value.shape(),
                            "adjoint shape mismatch for {:?}",
                            self.nodes[*inp].op
                        );
                        contributions.entry(*inp).or_default().push(v);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t64(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape.to_vec(), data.to_vec())
    }

    #[test]
    fn grad_of_weighted_sum_is_the_weights() {
        // loss = sum(w * x) => dloss/dw = x
        let mut g = Graph::new();
        let w = g.leaf(t64(&[3], &[0.5, -1.0, 2.0]), true);
        let x = g.constant(t64(&[3], &[3.0, 4.0, 5.0]));
        let p = g.mul(w, x).unwrap();
        let loss = g.sum(p).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut g = Graph::new();
        let w = g.leaf(t64(&[2], &[1.0, 2.0]), true);
        let unused = g.leaf(t64(&[2, 2], &[0.0; 4].to_vec()), true);
        let loss = g.sum(w).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(unused).unwrap().data(), &[0.0; 4]);
        assert_eq!(grads.get(unused).unwrap().shape(), &[2, 2]);
    }

    #[test]
    fn backward_twice_is_an_error() {
        let mut g = Graph::new();
        let w = g.leaf(t64(&[1], &[2.0]), true);
        let loss = g.sum(w).unwrap();
        let _ = g.backward(loss).unwrap();
        match g.backward(loss) {
            Err(GraphError::GraphConsumed) => {}
            other => panic!("expected GraphConsumed, got {other:?}"),
        }
    }

    #[test]
    fn softmax_of_constant_vector_is_uniform() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t64(&[4], &[0.7; 4]));
        let s = g.softmax(x, -1).unwrap();
        for &v in g.value(s).data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rejects_non_last_axis() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t64(&[2, 2], &[0.0; 4]));
        match g.softmax(x, 0) {
            Err(GraphError::UnsupportedOp(_)) => {}
            other => panic!("expected UnsupportedOp, got {other:?}"),
        }
    }

    #[test]
    fn one_by_one_conv_equals_per_position_linear_map() {
        // 1x1 conv with C->C' weights == independent linear map at each position
        let mut g = Graph::<f64>::new();
        let spec = Conv2dSpec {
            kh: 1,
            kw: 1,
            stride: 1,
            pad: 0,
            in_h: 2,
            in_w: 2,
            in_c: 2,
            out_c: 3,
        };
        let x = g.constant(t64(&[2, 2, 2], &[1.0, 2.0, -1.0, 0.5, 3.0, -2.0, 0.0, 1.5]));
        let w = g.constant(t64(&[1, 1, 2, 3], &[1.0, 0.0, 2.0, 0.0, 1.0, -1.0]));
        let y = g.conv2d(x, w, spec).unwrap();
        let xv = g.value(x).data().to_vec();
        let wv = g.value(w).data().to_vec();
        let yv = g.value(y).data();
        for pos in 0..4 {
            for oc in 0..3 {
                let expect = xv[pos * 2] * wv[oc] + xv[pos * 2 + 1] * wv[3 + oc];
                assert!((yv[pos * 3 + oc] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sum_pool_is_permutation_invariant() {
        // values chosen on a 2^-20 grid so f64 addition is exact and
        // reordering cannot change the bits
        let mut vals = Vec::new();
        let mut s = 12345u64;
        for _ in 0..8 * 8 * 4 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            vals.push(((s >> 40) as f64) / (1u64 << 20) as f64);
        }
        let base = t64(&[8, 8, 4], &vals);
        // permute spatial positions with a fixed shuffle
        let mut perm: Vec<usize> = (0..64).collect();
        let mut st = 99u64;
        for i in (1..64).rev() {
            st = st.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (st >> 33) as usize % (i + 1);
            perm.swap(i, j);
        }
        let mut pvals = vec![0.0; vals.len()];
        for (dst, &src) in perm.iter().enumerate() {
            pvals[dst * 4..dst * 4 + 4].copy_from_slice(&vals[src * 4..src * 4 + 4]);
        }
        let permuted = t64(&[8, 8, 4], &pvals);

        let mut g = Graph::new();
        let a = g.constant(base);
        let b = g.constant(permuted);
        let pa = g.sum_pool_spatial(a).unwrap();
        let pb = g.sum_pool_spatial(b).unwrap();
        assert_eq!(g.value(pa).data(), g.value(pb).data());
    }

    #[test]
    fn input_gradient_of_linear_fn_is_the_weight() {
        // f(x) = w . x => df/dx = w, independent of x
        let mut g = Graph::new();
        let w = g.leaf(t64(&[3], &[1.0, -2.0, 0.5]), true);
        let x = g.leaf(t64(&[3], &[0.3, 0.7, -0.1]), true);
        let p = g.mul(w, x).unwrap();
        let f = g.sum(p).unwrap();
        let dx = g.input_gradient(f, x).unwrap();
        assert_eq!(g.value(dx).data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn input_gradient_of_half_norm_squared_is_x() {
        // f(x) = 0.5 ||x||^2 => df/dx = x
        let mut g = Graph::new();
        let x = g.leaf(t64(&[4], &[1.0, -2.0, 3.0, 0.25]), true);
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq).unwrap();
        let f = g.scale(s, 0.5).unwrap();
        let dx = g.input_gradient(f, x).unwrap();
        let got = g.value(dx).data();
        for (a, b) in got.iter().zip([1.0, -2.0, 3.0, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_gradient_penalty_matches_closed_form() {
        // D(x) = w.x, penalty = lambda*(||w|| - 1)^2
        // dpenalty/dw = 2*lambda*(||w|| - 1) * w/||w||
        let lambda = 10.0;
        let wdata = [0.6, -0.8, 1.2];
        let mut g = Graph::new();
        let w = g.leaf(t64(&[3], &wdata), true);
        let x = g.leaf(t64(&[3], &[0.1, 0.2, 0.3]), true);
        let p = g.mul(w, x).unwrap();
        let score = g.sum(p).unwrap();
        let dx = g.input_gradient(score, x).unwrap();
        let norm = g.l2_norm(dx).unwrap();
        let shifted = g.add_scalar(norm, -1.0).unwrap();
        let sq = g.mul(shifted, shifted).unwrap();
        let penalty = g.scale(sq, lambda).unwrap();
        let grads = g.backward(penalty).unwrap();
        let got = grads.get(w).unwrap().data();
        let wn = (wdata.iter().map(|v| v * v).sum::<f64>()).sqrt();
        for (i, &wi) in wdata.iter().enumerate() {
            let expect = 2.0 * lambda * (wn - 1.0) * wi / wn;
            assert!(
                (got[i] - expect).abs() < 1e-9,
                "component {i}: {} vs {}",
                got[i],
                expect
            );
        }
    }

    #[test]
    fn second_order_through_softmax_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(t64(&[3], &[0.1, 0.2, 0.3]), true);
        let w = g.leaf(t64(&[3], &[1.0, 2.0, 3.0]), true);
        let h = g.mul(w, x).unwrap();
        let s = g.softmax(h, -1).unwrap();
        let f = g.sum(s).unwrap();
        let dx = g.input_gradient(f, x).unwrap();
        let n = g.l2_norm(dx).unwrap();
        match g.backward(n) {
            Err(GraphError::SecondOrderUnsupported(_)) => {}
            other => panic!("expected SecondOrderUnsupported, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(t64(&[1], &[1.0]));
        let b = g.constant(t64(&[1], &[0.0]));
        match g.div(a, b) {
            Err(GraphError::NonFinite(_)) => {}
            other => panic!("expected NonFinite, got {:?}", other.map(|_| ())),
        }
    }
}
