//! Per-op vector-Jacobian products, recorded as graph nodes.
//!
//! Each rule receives the adjoint of the node's output and returns one
//! optional adjoint per input (`None` = no gradient flows, e.g. through a
//! relu mask). Because the rules are built from catalogue ops, the adjoint
//! subgraph is itself differentiable — except for the fused softmax
//! backward kernels, which deliberately stop at first order.

use super::op::Op;
use super::{Graph, GraphError, Scalar, Var};

// guards the 1/||x|| factor in the norm gradient at the origin
const NORM_EPS: f64 = 1e-12;

pub(super) fn record<T: Scalar>(
    g: &mut Graph<T>,
    op: &Op,
    inputs: &[usize],
    out: Var,
    gout: Var,
) -> Result<Vec<Option<Var>>, GraphError> {
    let iv = |i: usize| Var(inputs[i]);
    match op {
        Op::Leaf => Ok(vec![]),
        Op::Add => Ok(vec![Some(gout), Some(gout)]),
        Op::Sub => {
            let neg = g.scale(gout, -1.0)?;
            Ok(vec![Some(gout), Some(neg)])
        }
        Op::Mul => {
            let da = g.mul(gout, iv(1))?;
            let db = g.mul(gout, iv(0))?;
            Ok(vec![Some(da), Some(db)])
        }
        Op::Div => {
            // y = a/b: da = g/b, db = -g*y/b
            let da = g.div(gout, iv(1))?;
            let gy = g.mul(gout, out)?;
            let gyb = g.div(gy, iv(1))?;
            let db = g.scale(gyb, -1.0)?;
            Ok(vec![Some(da), Some(db)])
        }
        Op::Scale(c) => Ok(vec![Some(g.scale(gout, *c)?)]),
        Op::AddScalar(_) => Ok(vec![Some(gout)]),
        Op::MulScalarVar => {
            let dt = g.mul_scalar_var(gout, iv(1))?;
            let prod = g.mul(gout, iv(0))?;
            let ds = g.sum(prod)?;
            Ok(vec![Some(dt), Some(ds)])
        }
        Op::Matmul => {
            // y = a b: da = g b^T, db = a^T g
            let bt = g.transpose(iv(1))?;
            let da = g.matmul(gout, bt)?;
            let at = g.transpose(iv(0))?;
            let db = g.matmul(at, gout)?;
            Ok(vec![Some(da), Some(db)])
        }
        Op::Transpose => Ok(vec![Some(g.transpose(gout)?)]),
        Op::Conv2d(s) => {
            let dx = g.apply(Op::Conv2dInputGrad(*s), &[gout, iv(1)])?;
            let dw = g.apply(Op::Conv2dWeightGrad(*s), &[iv(0), gout])?;
            Ok(vec![Some(dx), Some(dw)])
        }
        Op::Conv2dInputGrad(s) => {
            // z = C_w^T gy (bilinear in gy, w); adjoint a is x-shaped:
            // d/dgy = conv(a, w), d/dw = weight_grad(a, gy)
            let dgy = g.apply(Op::Conv2d(*s), &[gout, iv(1)])?;
            let dw = g.apply(Op::Conv2dWeightGrad(*s), &[gout, iv(0)])?;
            Ok(vec![Some(dgy), Some(dw)])
        }
        Op::Conv2dWeightGrad(s) => {
            // dw = X * gy (bilinear in x, gy); adjoint b is w-shaped:
            // d/dx = input_grad(gy, b), d/dgy = conv(x, b)
            let dx = g.apply(Op::Conv2dInputGrad(*s), &[iv(1), gout])?;
            let dgy = g.apply(Op::Conv2d(*s), &[iv(0), gout])?;
            Ok(vec![Some(dx), Some(dgy)])
        }
        Op::Relu => {
            let mask = g.apply(Op::ReluMask(0.0), &[iv(0)])?;
            Ok(vec![Some(g.mul(gout, mask)?)])
        }
        Op::LeakyRelu(a) => {
            let mask = g.apply(Op::ReluMask(*a), &[iv(0)])?;
            Ok(vec![Some(g.mul(gout, mask)?)])
        }
        // derivative of the mask itself is zero almost everywhere
        Op::ReluMask(_) => Ok(vec![None]),
        Op::Tanh => {
            // 1 - y^2
            let y2 = g.mul(out, out)?;
            let neg = g.scale(y2, -1.0)?;
            let one_minus = g.add_scalar(neg, 1.0)?;
            Ok(vec![Some(g.mul(gout, one_minus)?)])
        }
        Op::Sigmoid => {
            // y (1 - y)
            let neg = g.scale(out, -1.0)?;
            let one_minus = g.add_scalar(neg, 1.0)?;
            let d = g.mul(out, one_minus)?;
            Ok(vec![Some(g.mul(gout, d)?)])
        }
        Op::Softplus => {
            let s = g.sigmoid(iv(0))?;
            Ok(vec![Some(g.mul(gout, s)?)])
        }
        Op::Softmax => {
            let dx = g.apply(Op::SoftmaxGrad, &[out, gout])?;
            Ok(vec![Some(dx)])
        }
        Op::LogSoftmax => {
            let dx = g.apply(Op::LogSoftmaxGrad, &[out, gout])?;
            Ok(vec![Some(dx)])
        }
        Op::SoftmaxGrad | Op::LogSoftmaxGrad => Err(GraphError::SecondOrderUnsupported(
            format!("{op:?}"),
        )),
        Op::Sum => {
            let shape = g.shape(iv(0)).to_vec();
            Ok(vec![Some(g.apply(Op::BroadcastScalar { shape }, &[gout])?)])
        }
        Op::Mean => {
            let shape = g.shape(iv(0)).to_vec();
            let n: usize = shape.iter().product();
            let scaled = g.scale(gout, 1.0 / n as f64)?;
            Ok(vec![Some(g.apply(Op::BroadcastScalar { shape }, &[scaled])?)])
        }
        Op::SumPoolSpatial => {
            let s = g.shape(iv(0));
            let (h, w) = (s[0], s[1]);
            Ok(vec![Some(g.apply(Op::BroadcastSpatial { h, w }, &[gout])?)])
        }
        Op::BroadcastSpatial { .. } => Ok(vec![Some(g.sum_pool_spatial(gout)?)]),
        Op::SumAllButLast => {
            let s = g.shape(iv(0));
            let lead = s[..s.len() - 1].to_vec();
            Ok(vec![Some(g.apply(Op::BroadcastLead { lead }, &[gout])?)])
        }
        Op::BroadcastLead { .. } => Ok(vec![Some(g.apply(Op::SumAllButLast, &[gout])?)]),
        Op::BroadcastScalar { .. } => Ok(vec![Some(g.sum(gout)?)]),
        Op::Concat { axis } => {
            let mut offs = 0usize;
            let mut grads = Vec::with_capacity(inputs.len());
            for &inp in inputs {
                let len = g.shape(Var(inp))[*axis];
                grads.push(Some(g.slice(gout, *axis, offs, len)?));
                offs += len;
            }
            Ok(grads)
        }
        Op::Slice { axis, start, len } => {
            let total = g.shape(iv(0))[*axis];
            let pad = Op::PadZero {
                axis: *axis,
                before: *start,
                after: total - start - len,
            };
            Ok(vec![Some(g.apply(pad, &[gout])?)])
        }
        Op::PadZero { axis, before, .. } => {
            let len = g.shape(iv(0))[*axis];
            Ok(vec![Some(g.slice(gout, *axis, *before, len)?)])
        }
        Op::EmbeddingLookup { indices } => {
            let vocab = g.shape(iv(0))[0];
            let scatter = Op::EmbeddingScatter {
                indices: indices.clone(),
                vocab,
            };
            Ok(vec![Some(g.apply(scatter, &[gout])?)])
        }
        Op::EmbeddingScatter { indices, .. } => {
            let lookup = Op::EmbeddingLookup {
                indices: indices.clone(),
            };
            Ok(vec![Some(g.apply(lookup, &[gout])?)])
        }
        Op::BiasAdd => {
            let db = g.apply(Op::SumAllButLast, &[gout])?;
            Ok(vec![Some(gout), Some(db)])
        }
        Op::L2Norm => {
            // d||x||/dx = x / ||x|| ; the adjoint is scalar
            let denom = g.add_scalar(out, NORM_EPS)?;
            let s = g.div(gout, denom)?;
            Ok(vec![Some(g.mul_scalar_var(iv(0), s)?)])
        }
        Op::Reshape { .. } => {
            let orig = g.shape(iv(0)).to_vec();
            Ok(vec![Some(g.reshape(gout, orig)?)])
        }
    }
}
