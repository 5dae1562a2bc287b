//! Operation catalogue: shape rules and forward kernels.
//!
//! Every op is deterministic (fixed loop orders, no platform-dependent math)
//! so that identical inputs produce bit-identical outputs within a precision
//! mode. Images are `[H, W, C]` row-major; matrices are `[rows, cols]`;
//! scalars are shape `[1]`.

use super::tensor::{Scalar, Tensor};
use super::GraphError;

/// Static attributes of a 2-D convolution, including the input geometry.
/// Carrying the geometry makes the shapes of the two gradient kernels
/// unambiguous without inspecting neighbouring nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
}

impl Conv2dSpec {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.kh) / self.stride + 1
    }
    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.kw) / self.stride + 1
    }
    /// Weight layout is `[KH, KW, Cin, Cout]`.
    pub fn weight_shape(&self) -> Vec<usize> {
        vec![self.kh, self.kw, self.in_c, self.out_c]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// externally-provided value (parameter, constant, or input)
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    /// elementwise multiply by a compile-time scalar
    Scale(f64),
    /// elementwise add a compile-time scalar
    AddScalar(f64),
    /// `(tensor, scalar-var [1])` -> tensor scaled by the runtime scalar
    MulScalarVar,
    /// `[m,k] x [k,n] -> [m,n]`
    Matmul,
    /// 2-D transpose
    Transpose,
    Conv2d(Conv2dSpec),
    /// gradient of `Conv2d` w.r.t. its input: `(gout, weight) -> x-shaped`
    Conv2dInputGrad(Conv2dSpec),
    /// gradient of `Conv2d` w.r.t. its weight: `(x, gout) -> weight-shaped`
    Conv2dWeightGrad(Conv2dSpec),
    Relu,
    LeakyRelu(f64),
    /// derivative mask of (leaky) relu: 1 where x > 0 else alpha.
    /// Its own derivative is zero almost everywhere.
    ReluMask(f64),
    Tanh,
    Sigmoid,
    /// numerically-stable ln(1 + e^x)
    Softplus,
    /// softmax along the last axis
    Softmax,
    /// log-softmax along the last axis
    LogSoftmax,
    /// fused backward of softmax: `(y, gout)`; has no second-order rule
    SoftmaxGrad,
    /// fused backward of log-softmax: `(y, gout)`; has no second-order rule
    LogSoftmaxGrad,
    /// full reduction to a scalar
    Sum,
    Mean,
    /// `[H,W,C] -> [C]`, permutation-invariant over spatial positions
    SumPoolSpatial,
    /// `[C] -> [H,W,C]` (tile over spatial positions)
    BroadcastSpatial { h: usize, w: usize },
    /// `[.., C] -> [C]` (reduce all leading axes)
    SumAllButLast,
    /// `[C] -> [lead.., C]`
    BroadcastLead { lead: Vec<usize> },
    /// `[1] -> shape` (fill)
    BroadcastScalar { shape: Vec<usize> },
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    /// inverse of `Slice`: embed into a zero tensor along `axis`
    PadZero { axis: usize, before: usize, after: usize },
    /// `(table [V,E]) -> [L,E]` row gather
    EmbeddingLookup { indices: Vec<usize> },
    /// `([L,E]) -> [V,E]` row scatter-add (gradient of lookup)
    EmbeddingScatter { indices: Vec<usize>, vocab: usize },
    /// `(x [.., C], b [C])` broadcast add over the last axis
    BiasAdd,
    /// Euclidean norm of all elements, scalar output
    L2Norm,
    Reshape { shape: Vec<usize> },
}

impl Op {
    /// Output shape given input shapes, or a shape error.
    pub fn infer_shape(&self, ins: &[&[usize]]) -> Result<Vec<usize>, GraphError> {
        let fail = |msg: String| Err(GraphError::Shape(msg));
        match self {
            Op::Leaf => fail("leaf has no inputs to infer from".into()),
            Op::Add | Op::Sub | Op::Mul | Op::Div => {
                if ins[0] != ins[1] {
                    return fail(format!(
                        "elementwise op on mismatched shapes {:?} vs {:?}",
                        ins[0], ins[1]
                    ));
                }
                Ok(ins[0].to_vec())
            }
            Op::Scale(_) | Op::AddScalar(_) => Ok(ins[0].to_vec()),
            Op::MulScalarVar => {
                if ins[1] != [1] {
                    return fail(format!("scalar operand must be [1], got {:?}", ins[1]));
                }
                Ok(ins[0].to_vec())
            }
            Op::Matmul => {
                let (a, b) = (ins[0], ins[1]);
                if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
                    return fail(format!("matmul on {:?} x {:?}", a, b));
                }
                Ok(vec![a[0], b[1]])
            }
            Op::Transpose => {
                if ins[0].len() != 2 {
                    return fail(format!("transpose needs rank 2, got {:?}", ins[0]));
                }
                Ok(vec![ins[0][1], ins[0][0]])
            }
            Op::Conv2d(s) => {
                if ins[0] != [s.in_h, s.in_w, s.in_c] {
                    return fail(format!("conv input {:?} != spec {:?}", ins[0], s));
                }
                if ins[1] != s.weight_shape().as_slice() {
                    return fail(format!("conv weight {:?} != spec {:?}", ins[1], s));
                }
                if s.in_h + 2 * s.pad < s.kh || s.in_w + 2 * s.pad < s.kw {
                    return fail(format!("kernel larger than padded input: {s:?}"));
                }
                Ok(vec![s.out_h(), s.out_w(), s.out_c])
            }
            Op::Conv2dInputGrad(s) => {
                if ins[0] != [s.out_h(), s.out_w(), s.out_c] {
                    return fail(format!("conv input-grad gout {:?} != spec {:?}", ins[0], s));
                }
                if ins[1] != s.weight_shape().as_slice() {
                    return fail(format!("conv input-grad weight {:?} != spec {:?}", ins[1], s));
                }
                Ok(vec![s.in_h, s.in_w, s.in_c])
            }
            Op::Conv2dWeightGrad(s) => {
                if ins[0] != [s.in_h, s.in_w, s.in_c] {
                    return fail(format!("conv weight-grad x {:?} != spec {:?}", ins[0], s));
                }
                if ins[1] != [s.out_h(), s.out_w(), s.out_c] {
                    return fail(format!("conv weight-grad gout {:?} != spec {:?}", ins[1], s));
                }
                Ok(s.weight_shape())
            }
            Op::Relu | Op::LeakyRelu(_) | Op::ReluMask(_) | Op::Tanh | Op::Sigmoid
            | Op::Softplus => Ok(ins[0].to_vec()),
            Op::Softmax | Op::LogSoftmax => {
                if ins[0].is_empty() {
                    return fail("softmax needs rank >= 1".into());
                }
                Ok(ins[0].to_vec())
            }
            Op::SoftmaxGrad | Op::LogSoftmaxGrad => {
                if ins[0] != ins[1] {
                    return fail(format!(
                        "softmax backward shapes differ: {:?} vs {:?}",
                        ins[0], ins[1]
                    ));
                }
                Ok(ins[0].to_vec())
            }
            Op::Sum | Op::Mean | Op::L2Norm => Ok(vec![1]),
            Op::SumPoolSpatial => {
                if ins[0].len() != 3 {
                    return fail(format!("sum_pool_spatial needs [H,W,C], got {:?}", ins[0]));
                }
                Ok(vec![ins[0][2]])
            }
            Op::BroadcastSpatial { h, w } => {
                if ins[0].len() != 1 {
                    return fail(format!("broadcast_spatial needs [C], got {:?}", ins[0]));
                }
                Ok(vec![*h, *w, ins[0][0]])
            }
            Op::SumAllButLast => {
                if ins[0].is_empty() {
                    return fail("sum_all_but_last needs rank >= 1".into());
                }
                Ok(vec![*ins[0].last().unwrap()])
            }
            Op::BroadcastLead { lead } => {
                if ins[0].len() != 1 {
                    return fail(format!("broadcast_lead needs [C], got {:?}", ins[0]));
                }
                let mut s = lead.clone();
                s.push(ins[0][0]);
                Ok(s)
            }
            Op::BroadcastScalar { shape } => {
                if ins[0] != [1] {
                    return fail(format!("broadcast_scalar needs [1], got {:?}", ins[0]));
                }
                Ok(shape.clone())
            }
            Op::Concat { axis } => {
                let first = ins[0];
                if *axis >= first.len() {
                    return fail(format!("concat axis {} out of range for {:?}", axis, first));
                }
                let mut total = 0usize;
                for s in ins {
                    if s.len() != first.len() {
                        return fail(format!("concat rank mismatch: {:?} vs {:?}", first, s));
                    }
                    for (d, (&a, &b)) in first.iter().zip(s.iter()).enumerate() {
                        if d != *axis && a != b {
                            return fail(format!("concat non-axis dims differ: {:?} vs {:?}", first, s));
                        }
                    }
                    total += s[*axis];
                }
                let mut out = first.to_vec();
                out[*axis] = total;
                Ok(out)
            }
            Op::Slice { axis, start, len } => {
                let s = ins[0];
                if *axis >= s.len() || start + len > s[*axis] || *len == 0 {
                    return fail(format!(
                        "slice axis {} [{}..{}] out of range for {:?}",
                        axis,
                        start,
                        start + len,
                        s
                    ));
                }
                let mut out = s.to_vec();
                out[*axis] = *len;
                Ok(out)
            }
            Op::PadZero { axis, before, after } => {
                let s = ins[0];
                if *axis >= s.len() {
                    return fail(format!("pad axis {} out of range for {:?}", axis, s));
                }
                let mut out = s.to_vec();
                out[*axis] += before + after;
                Ok(out)
            }
            Op::EmbeddingLookup { indices } => {
                let s = ins[0];
                if s.len() != 2 {
                    return fail(format!("embedding table must be [V,E], got {:?}", s));
                }
                if let Some(&bad) = indices.iter().find(|&&i| i >= s[0]) {
                    return fail(format!("embedding index {} out of vocab {}", bad, s[0]));
                }
                Ok(vec![indices.len(), s[1]])
            }
            Op::EmbeddingScatter { indices, vocab } => {
                let s = ins[0];
                if s.len() != 2 || s[0] != indices.len() {
                    return fail(format!(
                        "scatter input must be [{} ,E], got {:?}",
                        indices.len(),
                        s
                    ));
                }
                if let Some(&bad) = indices.iter().find(|&&i| i >= *vocab) {
                    return fail(format!("scatter index {} out of vocab {}", bad, vocab));
                }
                Ok(vec![*vocab, s[1]])
            }
            Op::BiasAdd => {
                let (x, b) = (ins[0], ins[1]);
                if b.len() != 1 || x.is_empty() || *x.last().unwrap() != b[0] {
                    return fail(format!("bias_add on {:?} + {:?}", x, b));
                }
                Ok(x.to_vec())
            }
            Op::Reshape { shape } => {
                let n: usize = shape.iter().product();
                let m: usize = ins[0].iter().product();
                if n != m {
                    return fail(format!("reshape {:?} -> {:?} changes volume", ins[0], shape));
                }
                Ok(shape.clone())
            }
        }
    }

    /// Forward evaluation. Input tensors match the shapes accepted by
    /// `infer_shape`; the output tensor has the inferred shape.
    pub fn eval<T: Scalar>(&self, ins: &[&Tensor<T>]) -> Tensor<T> {
        let shape = self
            .infer_shape(&ins.iter().map(|t| t.shape()).collect::<Vec<_>>())
            .expect("eval called with unchecked shapes");
        let out: Vec<T> = match self {
            Op::Leaf => unreachable!("leaf values are provided, not computed"),
            Op::Add => zip_map(ins[0], ins[1], |a, b| a + b),
            Op::Sub => zip_map(ins[0], ins[1], |a, b| a - b),
            Op::Mul => zip_map(ins[0], ins[1], |a, b| a * b),
            Op::Div => zip_map(ins[0], ins[1], |a, b| a / b),
            Op::Scale(c) => {
                let c = T::from_f64(*c);
                ins[0].data().iter().map(|&v| v * c).collect()
            }
            Op::AddScalar(c) => {
                let c = T::from_f64(*c);
                ins[0].data().iter().map(|&v| v + c).collect()
            }
            Op::MulScalarVar => {
                let s = ins[1].item();
                ins[0].data().iter().map(|&v| v * s).collect()
            }
            Op::Matmul => {
                let (m, k) = (ins[0].shape()[0], ins[0].shape()[1]);
                let n = ins[1].shape()[1];
                matmul(ins[0].data(), ins[1].data(), m, k, n)
            }
            Op::Transpose => {
                let (r, c) = (ins[0].shape()[0], ins[0].shape()[1]);
                let x = ins[0].data();
                let mut out = vec![T::ZERO; r * c];
                for i in 0..r {
                    for j in 0..c {
                        out[j * r + i] = x[i * c + j];
                    }
                }
                out
            }
            Op::Conv2d(s) => conv2d_fwd(ins[0].data(), ins[1].data(), s),
            Op::Conv2dInputGrad(s) => conv2d_input_grad(ins[0].data(), ins[1].data(), s),
            Op::Conv2dWeightGrad(s) => conv2d_weight_grad(ins[0].data(), ins[1].data(), s),
            Op::Relu => ins[0].data().iter().map(|&v| v.maxv(T::ZERO)).collect(),
            Op::LeakyRelu(a) => {
                let a = T::from_f64(*a);
                ins[0]
                    .data()
                    .iter()
                    .map(|&v| if v > T::ZERO { v } else { v * a })
                    .collect()
            }
            Op::ReluMask(a) => {
                let a = T::from_f64(*a);
                ins[0]
                    .data()
                    .iter()
                    .map(|&v| if v > T::ZERO { T::ONE } else { a })
                    .collect()
            }
            Op::Tanh => ins[0].data().iter().map(|&v| v.tanh()).collect(),
            Op::Sigmoid => ins[0].data().iter().map(|&v| sigmoid(v)).collect(),
            Op::Softplus => ins[0].data().iter().map(|&v| softplus(v)).collect(),
            Op::Softmax => rows_map(ins[0], softmax_row),
            Op::LogSoftmax => rows_map(ins[0], log_softmax_row),
            Op::SoftmaxGrad => {
                // gx = y * (g - sum(y * g)) per row
                let k = *ins[0].shape().last().unwrap();
                let (y, g) = (ins[0].data(), ins[1].data());
                let mut out = vec![T::ZERO; y.len()];
                for r in 0..y.len() / k {
                    let (yr, gr) = (&y[r * k..(r + 1) * k], &g[r * k..(r + 1) * k]);
                    let mut dot = T::ZERO;
                    for i in 0..k {
                        dot += yr[i] * gr[i];
                    }
                    for i in 0..k {
                        out[r * k + i] = yr[i] * (gr[i] - dot);
                    }
                }
                out
            }
            Op::LogSoftmaxGrad => {
                // gx = g - exp(y) * sum(g) per row
                let k = *ins[0].shape().last().unwrap();
                let (y, g) = (ins[0].data(), ins[1].data());
                let mut out = vec![T::ZERO; y.len()];
                for r in 0..y.len() / k {
                    let (yr, gr) = (&y[r * k..(r + 1) * k], &g[r * k..(r + 1) * k]);
                    let mut tot = T::ZERO;
                    for i in 0..k {
                        tot += gr[i];
                    }
                    for i in 0..k {
                        out[r * k + i] = gr[i] - yr[i].exp() * tot;
                    }
                }
                out
            }
            Op::Sum => {
                let mut acc = T::ZERO;
                for &v in ins[0].data() {
                    acc += v;
                }
                vec![acc]
            }
            Op::Mean => {
                let mut acc = T::ZERO;
                for &v in ins[0].data() {
                    acc += v;
                }
                vec![acc / T::from_f64(ins[0].numel() as f64)]
            }
            Op::SumPoolSpatial => {
                let c = ins[0].shape()[2];
                let x = ins[0].data();
                let mut out = vec![T::ZERO; c];
                for pos in 0..x.len() / c {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += x[pos * c + i];
                    }
                }
                out
            }
            Op::BroadcastSpatial { h, w } => {
                let x = ins[0].data();
                let mut out = Vec::with_capacity(h * w * x.len());
                for _ in 0..h * w {
                    out.extend_from_slice(x);
                }
                out
            }
            Op::SumAllButLast => {
                let c = *ins[0].shape().last().unwrap();
                let x = ins[0].data();
                let mut out = vec![T::ZERO; c];
                for row in 0..x.len() / c {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += x[row * c + i];
                    }
                }
                out
            }
            Op::BroadcastLead { lead } => {
                let reps: usize = lead.iter().product();
                let x = ins[0].data();
                let mut out = Vec::with_capacity(reps * x.len());
                for _ in 0..reps {
                    out.extend_from_slice(x);
                }
                out
            }
            Op::BroadcastScalar { shape } => {
                let n: usize = shape.iter().product();
                vec![ins[0].item(); n]
            }
            Op::Concat { axis } => concat(ins, *axis, &shape),
            Op::Slice { axis, start, len } => slice(ins[0], *axis, *start, *len),
            Op::PadZero { axis, before, .. } => pad_zero(ins[0], *axis, *before, &shape),
            Op::EmbeddingLookup { indices } => {
                let e = ins[0].shape()[1];
                let t = ins[0].data();
                let mut out = Vec::with_capacity(indices.len() * e);
                for &i in indices {
                    out.extend_from_slice(&t[i * e..(i + 1) * e]);
                }
                out
            }
            Op::EmbeddingScatter { indices, vocab } => {
                let e = ins[0].shape()[1];
                let g = ins[0].data();
                let mut out = vec![T::ZERO; vocab * e];
                for (r, &i) in indices.iter().enumerate() {
                    for j in 0..e {
                        out[i * e + j] += g[r * e + j];
                    }
                }
                out
            }
            Op::BiasAdd => {
                let c = ins[1].numel();
                let (x, b) = (ins[0].data(), ins[1].data());
                let mut out = Vec::with_capacity(x.len());
                for row in 0..x.len() / c {
                    for i in 0..c {
                        out.push(x[row * c + i] + b[i]);
                    }
                }
                out
            }
            Op::L2Norm => {
                let mut acc = T::ZERO;
                for &v in ins[0].data() {
                    acc += v * v;
                }
                vec![acc.sqrt()]
            }
            Op::Reshape { .. } => return ins[0].reshaped(shape),
        };
        Tensor::from_vec(shape, out)
    }
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Vec<T> {
    a.data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| f(x, y))
        .collect()
}

fn sigmoid<T: Scalar>(x: T) -> T {
    // stable in both tails
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    // ln(1 + e^x) = max(x, 0) + ln(1 + e^-|x|)
    x.maxv(T::ZERO) + (T::ONE + (-x.abs()).exp()).ln()
}

fn rows_map<T: Scalar>(x: &Tensor<T>, f: impl Fn(&[T], &mut [T])) -> Vec<T> {
    let k = *x.shape().last().unwrap();
    let d = x.data();
    let mut out = vec![T::ZERO; d.len()];
    for r in 0..d.len() / k {
        f(&d[r * k..(r + 1) * k], &mut out[r * k..(r + 1) * k]);
    }
    out
}

fn softmax_row<T: Scalar>(row: &[T], out: &mut [T]) {
    let mut m = row[0];
    for &v in row {
        m = m.maxv(v);
    }
    let mut z = T::ZERO;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o = *o / z;
    }
}

fn log_softmax_row<T: Scalar>(row: &[T], out: &mut [T]) {
    let mut m = row[0];
    for &v in row {
        m = m.maxv(v);
    }
    let mut z = T::ZERO;
    for &v in row {
        z += (v - m).exp();
    }
    let lse = m + z.ln();
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v - lse;
    }
}

fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// y[oy,ox,oc] = sum_{ky,kx,ic} w[ky,kx,ic,oc] * x[oy*s-p+ky, ox*s-p+kx, ic]
fn conv2d_fwd<T: Scalar>(x: &[T], w: &[T], s: &Conv2dSpec) -> Vec<T> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut out = vec![T::ZERO; oh * ow * s.out_c];
    for oy in 0..oh {
        for ox in 0..ow {
            let orow = &mut out[(oy * ow + ox) * s.out_c..][..s.out_c];
            for ky in 0..s.kh {
                let iy = (oy * s.stride + ky) as isize - s.pad as isize;
                if iy < 0 || iy >= s.in_h as isize {
                    continue;
                }
                for kx in 0..s.kw {
                    let ix = (ox * s.stride + kx) as isize - s.pad as isize;
                    if ix < 0 || ix >= s.in_w as isize {
                        continue;
                    }
                    let xrow = &x[((iy as usize) * s.in_w + ix as usize) * s.in_c..][..s.in_c];
                    let wbase = ((ky * s.kw + kx) * s.in_c) * s.out_c;
                    for (ic, &xv) in xrow.iter().enumerate() {
                        let wrow = &w[wbase + ic * s.out_c..][..s.out_c];
                        for (o, &wv) in orow.iter_mut().zip(wrow) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// dx[iy,ix,ic] = sum over (oy,ox,ky,kx) hitting (iy,ix) of g[oy,ox,oc]*w[ky,kx,ic,oc]
fn conv2d_input_grad<T: Scalar>(g: &[T], w: &[T], s: &Conv2dSpec) -> Vec<T> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut dx = vec![T::ZERO; s.in_h * s.in_w * s.in_c];
    for oy in 0..oh {
        for ox in 0..ow {
            let grow = &g[(oy * ow + ox) * s.out_c..][..s.out_c];
            for ky in 0..s.kh {
                let iy = (oy * s.stride + ky) as isize - s.pad as isize;
                if iy < 0 || iy >= s.in_h as isize {
                    continue;
                }
                for kx in 0..s.kw {
                    let ix = (ox * s.stride + kx) as isize - s.pad as isize;
                    if ix < 0 || ix >= s.in_w as isize {
                        continue;
                    }
                    let xbase = ((iy as usize) * s.in_w + ix as usize) * s.in_c;
                    let wbase = ((ky * s.kw + kx) * s.in_c) * s.out_c;
                    for ic in 0..s.in_c {
                        let wrow = &w[wbase + ic * s.out_c..][..s.out_c];
                        let mut acc = T::ZERO;
                        for (&gv, &wv) in grow.iter().zip(wrow) {
                            acc += gv * wv;
                        }
                        dx[xbase + ic] += acc;
                    }
                }
            }
        }
    }
    dx
}

/// dw[ky,kx,ic,oc] = sum_{oy,ox} g[oy,ox,oc] * x[oy*s-p+ky, ox*s-p+kx, ic]
fn conv2d_weight_grad<T: Scalar>(x: &[T], g: &[T], s: &Conv2dSpec) -> Vec<T> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut dw = vec![T::ZERO; s.kh * s.kw * s.in_c * s.out_c];
    for oy in 0..oh {
        for ox in 0..ow {
            let grow = &g[(oy * ow + ox) * s.out_c..][..s.out_c];
            for ky in 0..s.kh {
                let iy = (oy * s.stride + ky) as isize - s.pad as isize;
                if iy < 0 || iy >= s.in_h as isize {
                    continue;
                }
                for kx in 0..s.kw {
                    let ix = (ox * s.stride + kx) as isize - s.pad as isize;
                    if ix < 0 || ix >= s.in_w as isize {
                        continue;
                    }
                    let xrow = &x[((iy as usize) * s.in_w + ix as usize) * s.in_c..][..s.in_c];
                    let wbase = ((ky * s.kw + kx) * s.in_c) * s.out_c;
                    for (ic, &xv) in xrow.iter().enumerate() {
                        let wrow = &mut dw[wbase + ic * s.out_c..][..s.out_c];
                        for (o, &gv) in wrow.iter_mut().zip(grow) {
                            *o += xv * gv;
                        }
                    }
                }
            }
        }
    }
    dw
}

fn concat<T: Scalar>(ins: &[&Tensor<T>], axis: usize, out_shape: &[usize]) -> Vec<T> {
    // outer = product of dims before axis, inner = product after
    let outer: usize = out_shape[..axis].iter().product();
    let inner: usize = out_shape[axis + 1..].iter().product();
    let mut out = Vec::with_capacity(out_shape.iter().product());
    for o in 0..outer {
        for t in ins {
            let ax = t.shape()[axis];
            let chunk = ax * inner;
            out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    out
}

fn slice<T: Scalar>(x: &Tensor<T>, axis: usize, start: usize, len: usize) -> Vec<T> {
    let s = x.shape();
    let outer: usize = s[..axis].iter().product();
    let inner: usize = s[axis + 1..].iter().product();
    let ax = s[axis];
    let mut out = Vec::with_capacity(outer * len * inner);
    let d = x.data();
    for o in 0..outer {
        let base = (o * ax + start) * inner;
        out.extend_from_slice(&d[base..base + len * inner]);
    }
    out
}

fn pad_zero<T: Scalar>(x: &Tensor<T>, axis: usize, before: usize, out_shape: &[usize]) -> Vec<T> {
    let s = x.shape();
    let outer: usize = s[..axis].iter().product();
    let inner: usize = s[axis + 1..].iter().product();
    let ax = s[axis];
    let out_ax = out_shape[axis];
    let mut out = vec![T::ZERO; outer * out_ax * inner];
    let d = x.data();
    for o in 0..outer {
        let src = o * ax * inner;
        let dst = (o * out_ax + before) * inner;
        out[dst..dst + ax * inner].copy_from_slice(&d[src..src + ax * inner]);
    }
    out
}
