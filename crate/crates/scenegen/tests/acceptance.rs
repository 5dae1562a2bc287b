//! Acceptance suite. Each test exercises one numbered criterion end to end
//! and prints a `criterion N: PASS` line on success (run with
//! `cargo test --test acceptance -- --nocapture` to see them).

mod common;

use common::{fd_check, fd_check_some, sample_tensor};
use rand_chacha::ChaCha8Rng;
use scenegen::graph::{Conv2dSpec, Graph, Op, Tensor, Var};
use scenegen::rng::{derive, Stream};

const FIRST_ORDER_TOL: f64 = 1e-4;
const SECOND_ORDER_TOL: f64 = 1e-3;

fn rng_for(op_tag: u64, instance: u64) -> ChaCha8Rng {
    derive(20_260_810, Stream::Eval, &[op_tag, instance])
}

/// Wraps a non-scalar op output into a scalar objective `sum(out * probe)`
/// so finite differences apply uniformly.
fn probed(
    rng: &mut ChaCha8Rng,
    shape_of_out: Vec<usize>,
    f: impl Fn(&mut Graph<f64>, &[Var]) -> Var + 'static,
) -> Box<common::BuildFn> {
    let probe = sample_tensor(rng, &shape_of_out, 0.0);
    Box::new(move |g, vars| {
        let out = f(g, vars);
        let p = g.constant(probe.clone());
        let prod = g.mul(out, p).unwrap();
        g.sum(prod).unwrap()
    })
}

struct OpCase {
    name: &'static str,
    /// (input shapes, kink margin, builder factory)
    shapes: Vec<Vec<usize>>,
    margin: f64,
    build: Box<dyn Fn(&mut ChaCha8Rng) -> Box<common::BuildFn>>,
}

fn binary_case(name: &'static str, op: Op, shape: Vec<usize>, margin: f64) -> OpCase {
    let out_shape = shape.clone();
    OpCase {
        name,
        shapes: vec![shape.clone(), shape],
        margin,
        build: Box::new(move |rng| {
            let op = op.clone();
            probed(rng, out_shape.clone(), move |g, v| {
                g.apply(op.clone(), &[v[0], v[1]]).unwrap()
            })
        }),
    }
}

fn unary_case(name: &'static str, op: Op, shape: Vec<usize>, margin: f64) -> OpCase {
    let out_shape = op.infer_shape(&[&shape]).unwrap();
    OpCase {
        name,
        shapes: vec![shape],
        margin,
        build: Box::new(move |rng| {
            let op = op.clone();
            probed(rng, out_shape.clone(), move |g, v| {
                g.apply(op.clone(), &[v[0]]).unwrap()
            })
        }),
    }
}

fn op_catalogue() -> Vec<OpCase> {
    let mut cases = vec![
        binary_case("add", Op::Add, vec![2, 3], 0.0),
        binary_case("sub", Op::Sub, vec![2, 3], 0.0),
        binary_case("mul", Op::Mul, vec![2, 3], 0.0),
        binary_case("div", Op::Div, vec![2, 3], 0.3),
        unary_case("scale", Op::Scale(1.7), vec![4], 0.0),
        unary_case("add_scalar", Op::AddScalar(-0.3), vec![4], 0.0),
        unary_case("relu", Op::Relu, vec![3, 3], 0.1),
        unary_case("leaky_relu", Op::LeakyRelu(0.2), vec![3, 3], 0.1),
        unary_case("relu_mask", Op::ReluMask(0.2), vec![3, 3], 0.1),
        unary_case("tanh", Op::Tanh, vec![2, 3], 0.0),
        unary_case("sigmoid", Op::Sigmoid, vec![2, 3], 0.0),
        unary_case("softplus", Op::Softplus, vec![2, 3], 0.0),
        unary_case("softmax", Op::Softmax, vec![5], 0.0),
        unary_case("softmax_rows", Op::Softmax, vec![2, 4], 0.0),
        unary_case("log_softmax", Op::LogSoftmax, vec![5], 0.0),
        unary_case("sum", Op::Sum, vec![3, 4], 0.0),
        unary_case("mean", Op::Mean, vec![3, 4], 0.0),
        unary_case("l2_norm", Op::L2Norm, vec![6], 0.1),
        unary_case("sum_pool_spatial", Op::SumPoolSpatial, vec![3, 4, 2], 0.0),
        unary_case(
            "broadcast_spatial",
            Op::BroadcastSpatial { h: 3, w: 2 },
            vec![4],
            0.0,
        ),
        unary_case("sum_all_but_last", Op::SumAllButLast, vec![3, 2, 4], 0.0),
        unary_case(
            "broadcast_lead",
            Op::BroadcastLead { lead: vec![2, 3] },
            vec![4],
            0.0,
        ),
        unary_case(
            "broadcast_scalar",
            Op::BroadcastScalar { shape: vec![2, 3] },
            vec![1],
            0.0,
        ),
        unary_case(
            "slice",
            Op::Slice {
                axis: 1,
                start: 1,
                len: 2,
            },
            vec![3, 4],
            0.0,
        ),
        unary_case(
            "pad_zero",
            Op::PadZero {
                axis: 0,
                before: 1,
                after: 2,
            },
            vec![2, 3],
            0.0,
        ),
        unary_case(
            "embedding_lookup",
            Op::EmbeddingLookup {
                indices: vec![2, 0, 4, 2],
            },
            vec![5, 3],
            0.0,
        ),
        unary_case(
            "embedding_scatter",
            Op::EmbeddingScatter {
                indices: vec![1, 3, 1],
                vocab: 5,
            },
            vec![3, 2],
            0.0,
        ),
        unary_case("transpose", Op::Transpose, vec![3, 4], 0.0),
        unary_case(
            "reshape",
            Op::Reshape { shape: vec![6, 2] },
            vec![3, 4],
            0.0,
        ),
    ];

    // matmul
    cases.push(OpCase {
        name: "matmul",
        shapes: vec![vec![3, 2], vec![2, 4]],
        margin: 0.0,
        build: Box::new(|rng| {
            probed(rng, vec![3, 4], |g, v| g.matmul(v[0], v[1]).unwrap())
        }),
    });
    // mul_scalar_var
    cases.push(OpCase {
        name: "mul_scalar_var",
        shapes: vec![vec![3, 2], vec![1]],
        margin: 0.0,
        build: Box::new(|rng| {
            probed(rng, vec![3, 2], |g, v| g.mul_scalar_var(v[0], v[1]).unwrap())
        }),
    });
    // bias_add on a rank-3 input and on a vector
    cases.push(OpCase {
        name: "bias_add",
        shapes: vec![vec![2, 3, 4], vec![4]],
        margin: 0.0,
        build: Box::new(|rng| {
            probed(rng, vec![2, 3, 4], |g, v| g.bias_add(v[0], v[1]).unwrap())
        }),
    });
    cases.push(OpCase {
        name: "bias_add_vec",
        shapes: vec![vec![4], vec![4]],
        margin: 0.0,
        build: Box::new(|rng| {
            probed(rng, vec![4], |g, v| g.bias_add(v[0], v[1]).unwrap())
        }),
    });
    // concat along each axis
    cases.push(OpCase {
        name: "concat_axis0",
        shapes: vec![vec![2, 3], vec![1, 3], vec![2, 3]],
        margin: 0.0,
        build: Box::new(|rng| {
            probed(rng, vec![5, 3], |g, v| g.concat(v, 0).unwrap())
        }),
    });
    cases.push(OpCase {
        name: "concat_axis2",
        shapes: vec![vec![2, 2, 2], vec![2, 2, 3]],
        margin: 0.0,
        build: Box::new(|rng| {
            probed(rng, vec![2, 2, 5], |g, v| g.concat(v, 2).unwrap())
        }),
    });

    // conv2d variants, plus the two gradient kernels as first-class ops
    let specs = [
        ("conv2d_k3s1p1", Conv2dSpec { kh: 3, kw: 3, stride: 1, pad: 1, in_h: 4, in_w: 5, in_c: 2, out_c: 3 }),
        ("conv2d_k3s2p1", Conv2dSpec { kh: 3, kw: 3, stride: 2, pad: 1, in_h: 5, in_w: 5, in_c: 2, out_c: 2 }),
        ("conv2d_k1s1p0", Conv2dSpec { kh: 1, kw: 1, stride: 1, pad: 0, in_h: 3, in_w: 3, in_c: 3, out_c: 4 }),
        ("conv2d_k2s2p0", Conv2dSpec { kh: 2, kw: 2, stride: 2, pad: 0, in_h: 4, in_w: 4, in_c: 2, out_c: 3 }),
    ];
    for (name, s) in specs {
        let out_shape = vec![s.out_h(), s.out_w(), s.out_c];
        cases.push(OpCase {
            name,
            shapes: vec![vec![s.in_h, s.in_w, s.in_c], s.weight_shape()],
            margin: 0.0,
            build: Box::new(move |rng| {
                probed(rng, out_shape.clone(), move |g, v| {
                    g.conv2d(v[0], v[1], s).unwrap()
                })
            }),
        });
    }
    let s = specs[1].1;
    cases.push(OpCase {
        name: "conv2d_input_grad",
        shapes: vec![vec![s.out_h(), s.out_w(), s.out_c], s.weight_shape()],
        margin: 0.0,
        build: Box::new(move |rng| {
            probed(rng, vec![s.in_h, s.in_w, s.in_c], move |g, v| {
                g.apply(Op::Conv2dInputGrad(s), &[v[0], v[1]]).unwrap()
            })
        }),
    });
    cases.push(OpCase {
        name: "conv2d_weight_grad",
        shapes: vec![vec![s.in_h, s.in_w, s.in_c], vec![s.out_h(), s.out_w(), s.out_c]],
        margin: 0.0,
        build: Box::new(move |rng| {
            probed(rng, s.weight_shape(), move |g, v| {
                g.apply(Op::Conv2dWeightGrad(s), &[v[0], v[1]]).unwrap()
            })
        }),
    });
    cases
}

#[test]
fn criterion_1_autodiff_gradient_suite() {
    let started = std::time::Instant::now();
    // first order: every op, 100 random instances each
    for (tag, case) in op_catalogue().into_iter().enumerate() {
        let mut worst = 0.0f64;
        for instance in 0..100u64 {
            let mut rng = rng_for(tag as u64, instance);
            let inputs: Vec<Tensor<f64>> = case
                .shapes
                .iter()
                .map(|s| sample_tensor(&mut rng, s, case.margin))
                .collect();
            let build = (case.build)(&mut rng);
            let err = fd_check(&build, &inputs);
            if err > worst {
                worst = err;
            }
        }
        assert!(
            worst < FIRST_ORDER_TOL,
            "op {}: max relative error {worst:.3e} exceeds {FIRST_ORDER_TOL:.0e}",
            case.name
        );
    }

    // second order: parameter gradients of the gradient penalty
    // (a) two-layer tanh network f(x) = w2 . tanh(W1 x + b1)
    for instance in 0..20u64 {
        let mut rng = rng_for(900, instance);
        let w1 = sample_tensor(&mut rng, &[4, 3], 0.0);
        let b1 = sample_tensor(&mut rng, &[4], 0.0);
        let w2 = sample_tensor(&mut rng, &[4], 0.0);
        let x = sample_tensor(&mut rng, &[3], 0.0);
        let build: Box<common::BuildFn> = Box::new(|g, v| {
            let (w1, b1, w2, x) = (v[0], v[1], v[2], v[3]);
            let xc = g.reshape(x, vec![3, 1]).unwrap();
            let h = g.matmul(w1, xc).unwrap();
            let h = g.reshape(h, vec![4]).unwrap();
            let h = g.bias_add(h, b1).unwrap();
            let h = g.tanh(h).unwrap();
            let p = g.mul(w2, h).unwrap();
            let f = g.sum(p).unwrap();
            let dx = g.input_gradient(f, x).unwrap();
            let n = g.l2_norm(dx).unwrap();
            let shifted = g.add_scalar(n, -1.0).unwrap();
            let sq = g.mul(shifted, shifted).unwrap();
            g.scale(sq, 10.0).unwrap()
        });
        let err = fd_check_some(&build, &[w1, b1, w2, x], &[0, 1, 2]);
        assert!(
            err < SECOND_ORDER_TOL,
            "tanh-net penalty instance {instance}: relative error {err:.3e}"
        );
    }

    // (b) conv + bias + leaky-relu + sum-pool + linear readout
    let spec = Conv2dSpec { kh: 3, kw: 3, stride: 1, pad: 1, in_h: 4, in_w: 4, in_c: 2, out_c: 3 };
    for instance in 0..20u64 {
        let mut rng = rng_for(901, instance);
        let w = sample_tensor(&mut rng, &spec.weight_shape(), 0.0);
        let b = sample_tensor(&mut rng, &[3], 0.0);
        let v_out = sample_tensor(&mut rng, &[3], 0.0);
        let x = sample_tensor(&mut rng, &[4, 4, 2], 0.1);
        let build: Box<common::BuildFn> = Box::new(move |g, v| {
            let (w, b, vo, x) = (v[0], v[1], v[2], v[3]);
            let c = g.conv2d(x, w, spec).unwrap();
            let c = g.bias_add(c, b).unwrap();
            let c = g.leaky_relu(c, 0.2).unwrap();
            let pooled = g.sum_pool_spatial(c).unwrap();
            let p = g.mul(pooled, vo).unwrap();
            let f = g.sum(p).unwrap();
            let dx = g.input_gradient(f, x).unwrap();
            let n = g.l2_norm(dx).unwrap();
            let shifted = g.add_scalar(n, -1.0).unwrap();
            let sq = g.mul(shifted, shifted).unwrap();
            g.scale(sq, 10.0).unwrap()
        });
        let err = fd_check_some(&build, &[w, b, v_out, x], &[0, 1, 2]);
        assert!(
            err < SECOND_ORDER_TOL,
            "conv-net penalty instance {instance}: relative error {err:.3e}"
        );
    }

    let dt = started.elapsed();
    assert!(dt.as_secs() < 120, "criterion 1 exceeded 2 minutes: {dt:?}");
    println!("criterion 1: PASS — gradient suite ({dt:.1?})");
}
