//! Adam optimizer with bias correction.

use super::tensor::{Scalar, Tensor};
use super::GraphError;

#[derive(Clone, Copy, Debug)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: step count plus first/second-moment accumulators with
/// the same shapes as the parameters they track.
#[derive(Clone)]
pub struct AdamState<T: Scalar> {
    pub t: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub hyper: AdamParams,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>], hyper: AdamParams) -> Self {
        AdamState {
            t: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            hyper,
        }
    }
}

/// One Adam update. Any non-finite gradient aborts the whole step: the
/// parameters and state are left untouched and `NonFiniteGradient` is
/// returned so the caller can skip and log.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<(), GraphError> {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    for (p, g) in params.iter().zip(grads) {
        assert_eq!(p.shape(), g.shape(), "param/grad shape mismatch");
        if !g.is_all_finite() {
            return Err(GraphError::NonFiniteGradient);
        }
    }
    let h = state.hyper;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - h.beta1.powi(t);
    let bc2 = 1.0 - h.beta2.powi(t);
    let (b1, b2) = (T::from_f64(h.beta1), T::from_f64(h.beta2));
    let (ob1, ob2) = (T::from_f64(1.0 - h.beta1), T::from_f64(1.0 - h.beta2));
    let lr = T::from_f64(h.lr);
    let eps = T::from_f64(h.eps);
    let (ibc1, ibc2) = (T::from_f64(1.0 / bc1), T::from_f64(1.0 / bc2));

    for i in 0..params.len() {
        let n = params[i].numel();
        let mut mdat = Vec::with_capacity(n);
        let mut vdat = Vec::with_capacity(n);
        let mut pdat = Vec::with_capacity(n);
        let gs = grads[i].data();
        let ms = state.m[i].data();
        let vs = state.v[i].data();
        let ps = params[i].data();
        for j in 0..n {
            let m = b1 * ms[j] + ob1 * gs[j];
            let v = b2 * vs[j] + ob2 * gs[j] * gs[j];
            let mhat = m * ibc1;
            let vhat = v * ibc2;
            mdat.push(m);
            vdat.push(v);
            pdat.push(ps[j] - lr * mhat / (vhat.sqrt() + eps));
        }
        state.m[i] = Tensor::from_vec(params[i].shape().to_vec(), mdat);
        state.v[i] = Tensor::from_vec(params[i].shape().to_vec(), vdat);
        params[i] = Tensor::from_vec(params[i].shape().to_vec(), pdat);
    }
    Ok(())
}
