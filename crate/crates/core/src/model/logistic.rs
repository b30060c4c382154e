//! Multinomial logistic regression: logits `z = Wᵀx + b`, softmax output.
//!
//! Layout: `w` is `input_dim × num_classes` row-major (`w[i·c + j]` connects
//! feature `i` to class `j`), `b` is the per-class bias.

use alloc::vec;
use alloc::vec::Vec;

use super::{softmax_xent_inplace, Batch, ModelSpec};
use crate::params::ParamVector;


pub(super) fn logits(spec: &ModelSpec, w: &ParamVector, x: &[f32]) -> Vec<f64> {
    let c = spec.num_classes;
    let wm = &w.tensors[0].values;
    let b = &w.tensors[1].values;
    let mut z: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
    for (i, &xi) in x.iter().enumerate() {
        let xi = f64::from(xi);
        if xi == 0.0 {
            continue;
        }
        let row = &wm[i * c..(i + 1) * c];
        for (zj, &wij) in z.iter_mut().zip(row) {
            *zj += xi * f64::from(wij);
        }
    }
    z
}

pub(super) fn loss_and_grad(spec: &ModelSpec, w: &ParamVector, batch: &Batch) -> (f64, ParamVector) {
    let c = spec.num_classes;
    let d = spec.input_dim;
    let inv_n = 1.0 / batch.len() as f64;

    let mut dw = vec![0.0f64; d * c];
    let mut db = vec![0.0f64; c];
    let mut loss = 0.0;

    for s in 0..batch.len() {
        let x = batch.row(s);
        let mut z = logits(spec, w, x);
        loss += softmax_xent_inplace(&mut z, batch.labels[s]);
        // z now holds probabilities; dlogit = (p - onehot)/n
        z[batch.labels[s]] -= 1.0;
        for (j, &dz) in z.iter().enumerate() {
            let dz = dz * inv_n;
            db[j] += dz;
            for (i, &xi) in x.iter().enumerate() {
                dw[i * c + j] += f64::from(xi) * dz;
            }
        }
    }

    let mut grad = w.zeros_like();
    grad.tensors[0].values = dw.into_iter().map(|v| v as f32).collect();
    grad.tensors[1].values = db.into_iter().map(|v| v as f32).collect();
    (loss * inv_n, grad)
}
