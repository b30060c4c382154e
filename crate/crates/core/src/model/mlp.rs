//! One-hidden-layer perceptron: `z = W2ᵀ·relu(W1ᵀx + b1) + b2`.
//!
//! Layout: `w1` is `input_dim × hidden`, `w2` is `hidden × num_classes`,
//! both row-major, with per-unit biases `b1`/`b2`.

use alloc::vec;
use alloc::vec::Vec;

use super::{softmax_xent_inplace, Architecture, Batch, ModelSpec};
use crate::params::ParamVector;


fn hidden_width(spec: &ModelSpec) -> usize {
    match spec.architecture {
        Architecture::MlpOneHidden { hidden } => hidden,
        _ => unreachable!("mlp forward called with a non-mlp spec"),
    }
}

/// Hidden preactivations for one sample.
fn preact_hidden(spec: &ModelSpec, w: &ParamVector, x: &[f32]) -> Vec<f64> {
    let h = hidden_width(spec);
    let w1 = &w.tensors[0].values;
    let b1 = &w.tensors[1].values;
    let mut pre: Vec<f64> = b1.iter().map(|&v| f64::from(v)).collect();
    for (i, &xi) in x.iter().enumerate() {
        let xi = f64::from(xi);
        if xi == 0.0 {
            continue;
        }
        let row = &w1[i * h..(i + 1) * h];
        for (pj, &wij) in pre.iter_mut().zip(row) {
            *pj += xi * f64::from(wij);
        }
    }
    pre
}

fn output_from_hidden(spec: &ModelSpec, w: &ParamVector, a1: &[f64]) -> Vec<f64> {
    let c = spec.num_classes;
    let w2 = &w.tensors[2].values;
    let b2 = &w.tensors[3].values;
    let mut z: Vec<f64> = b2.iter().map(|&v| f64::from(v)).collect();
    for (j, &aj) in a1.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        let row = &w2[j * c..(j + 1) * c];
        for (zk, &wjk) in z.iter_mut().zip(row) {
            *zk += aj * f64::from(wjk);
        }
    }
    z
}

pub(super) fn logits(spec: &ModelSpec, w: &ParamVector, x: &[f32]) -> Vec<f64> {
    let mut a1 = preact_hidden(spec, w, x);
    for v in &mut a1 {
        *v = v.max(0.0);
    }
    output_from_hidden(spec, w, &a1)
}

/// All ReLU preactivations for one sample, used by gradient-check probes to
/// stay clear of the kink.
pub(crate) fn preactivations(spec: &ModelSpec, w: &ParamVector, x: &[f32]) -> Vec<f64> {
    preact_hidden(spec, w, x)
}

pub(super) fn loss_and_grad(spec: &ModelSpec, w: &ParamVector, batch: &Batch) -> (f64, ParamVector) {
    let h = hidden_width(spec);
    let c = spec.num_classes;
    let d = spec.input_dim;
    let inv_n = 1.0 / batch.len() as f64;
    let w2 = &w.tensors[2].values;

    let mut dw1 = vec![0.0f64; d * h];
    let mut db1 = vec![0.0f64; h];
    let mut dw2 = vec![0.0f64; h * c];
    let mut db2 = vec![0.0f64; c];
    let mut loss = 0.0;

    for s in 0..batch.len() {
        let x = batch.row(s);
        let pre1 = preact_hidden(spec, w, x);
        let a1: Vec<f64> = pre1.iter().map(|&v| v.max(0.0)).collect();
        let mut z = output_from_hidden(spec, w, &a1);
        loss += softmax_xent_inplace(&mut z, batch.labels[s]);
        z[batch.labels[s]] -= 1.0;

        let mut da1 = vec![0.0f64; h];
        for (k, &dzk) in z.iter().enumerate() {
            let dzk = dzk * inv_n;
            db2[k] += dzk;
            for j in 0..h {
                dw2[j * c + k] += a1[j] * dzk;
                da1[j] += f64::from(w2[j * c + k]) * dzk;
            }
        }
        for j in 0..h {
            // ReLU passes gradient only where the preactivation is positive.
            if pre1[j] > 0.0 {
                let dp = da1[j];
                db1[j] += dp;
                for (i, &xi) in x.iter().enumerate() {
                    dw1[i * h + j] += f64::from(xi) * dp;
                }
            }
        }
    }

    let mut grad = w.zeros_like();
    grad.tensors[0].values = dw1.into_iter().map(|v| v as f32).collect();
    grad.tensors[1].values = db1.into_iter().map(|v| v as f32).collect();
    grad.tensors[2].values = dw2.into_iter().map(|v| v as f32).collect();
    grad.tensors[3].values = db2.into_iter().map(|v| v as f32).collect();
    (loss * inv_n, grad)
}
