//! Shared helpers for integration tests: the central finite-difference
//! oracle used to check analytic gradients, and small tensor builders.
//!
//! The oracle never calls `backward`: it re-evaluates the forward function
//! at perturbed inputs, so it stays independent of the differentiation path
//! it is checking.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use scenegen::graph::{Graph, Tensor, Var};

pub const FD_H: f64 = 1e-5;

/// A differentiable test function: builds the computation for the given
/// leaf inputs and returns a scalar output var.
pub type BuildFn = dyn Fn(&mut Graph<f64>, &[Var]) -> Var;

/// Samples a tensor with entries in [-1.5, 1.5], keeping every entry at
/// least `margin` away from zero (kink avoidance for relu-family ops).
pub fn sample_tensor(rng: &mut ChaCha8Rng, shape: &[usize], margin: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let mut v: f64 = rng.gen_range(-1.5..1.5);
            if v.abs() < margin {
                v = if v >= 0.0 { margin } else { -margin };
            }
            v
        })
        .collect();
    Tensor::from_vec(shape.to_vec(), data)
}

fn eval_scalar(build: &BuildFn, inputs: &[Tensor<f64>]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = build(&mut g, &vars);
    g.value(out).item()
}

fn perturbed(t: &Tensor<f64>, flat: usize, delta: f64) -> Tensor<f64> {
    let mut data = t.data().to_vec();
    data[flat] += delta;
    Tensor::from_vec(t.shape().to_vec(), data)
}

/// Relative error with a small absolute floor so near-zero gradients are
/// compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + 1e-8)
}

/// Checks `d out / d inputs[i]` for every input element against central
/// finite differences. Returns the maximum relative error observed.
pub fn fd_check(build: &BuildFn, inputs: &[Tensor<f64>]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = build(&mut g, &vars);
    assert_eq!(g.value(out).numel(), 1, "fd_check needs a scalar output");
    let grads = g.backward(out).expect("backward failed in fd_check");

    let mut worst = 0.0f64;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).expect("missing gradient");
        for flat in 0..input.numel() {
            let plus = {
                let mut ins = inputs.to_vec();
                ins[i] = perturbed(input, flat, FD_H);
                eval_scalar(build, &ins)
            };
            let minus = {
                let mut ins = inputs.to_vec();
                ins[i] = perturbed(input, flat, -FD_H);
                eval_scalar(build, &ins)
            };
            let fd = (plus - minus) / (2.0 * FD_H);
            let an = analytic.data()[flat];
            let e = rel_err(fd, an);
            if e > worst {
                worst = e;
            }
        }
    }
    worst
}

/// Like `fd_check` but differentiates only the listed inputs (the others
/// stay constants). Used for second-order checks where perturbing the
/// primal input is not the point.
pub fn fd_check_some(build: &BuildFn, inputs: &[Tensor<f64>], wrt: &[usize]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out).expect("backward failed");

    let mut worst = 0.0f64;
    for &i in wrt {
        let analytic = grads.get(vars[i]).expect("missing gradient");
        for flat in 0..inputs[i].numel() {
            let plus = {
                let mut ins = inputs.to_vec();
                ins[i] = perturbed(&inputs[i], flat, FD_H);
                eval_scalar(build, &ins)
            };
            let minus = {
                let mut ins = inputs.to_vec();
                ins[i] = perturbed(&inputs[i], flat, -FD_H);
                eval_scalar(build, &ins)
            };
            let fd = (plus - minus) / (2.0 * FD_H);
            let e = rel_err(fd, analytic.data()[flat]);
            if e > worst {
                worst = e;
            }
        }
    }
    worst
}
