//! Small CNN: two 2×2 stride-1 valid convolutions with ReLU, then a fully
//! connected softmax head. Input is a single-channel square image.
//!
//! Layouts (row-major):
//! * `conv1_w`: `[c1, 1, 2, 2]`, `conv2_w`: `[c2, c1, 2, 2]`
//! * feature maps and the flattened fc input are channel-major
//!   (`(channel·side + y)·side + x`)
//! * `fc_w`: `[flat, num_classes]`

use alloc::vec;
use alloc::vec::Vec;

use super::{softmax_xent_inplace, Architecture, Batch, ModelSpec};
use crate::params::ParamVector;


struct Dims {
    s: usize,  // input side
    r1: usize, // conv1 output side
    r2: usize, // conv2 output side
    c1: usize,
    c2: usize,
}

fn dims(spec: &ModelSpec) -> Dims {
    let (c1, c2) = match spec.architecture {
        Architecture::SmallCnn {
            conv1_channels,
            conv2_channels,
        } => (conv1_channels, conv2_channels),
        _ => unreachable!("cnn forward called with a non-cnn spec"),
    };
    let s = spec.image_side();
    Dims {
        s,
        r1: s - 1,
        r2: s - 2,
        c1,
        c2,
    }
}

struct Forward {
    pre1: Vec<f64>, // c1 × r1 × r1
    a1: Vec<f64>,
    pre2: Vec<f64>, // c2 × r2 × r2
    a2: Vec<f64>,
    z: Vec<f64>, // num_classes
}

fn forward(spec: &ModelSpec, w: &ParamVector, x: &[f32]) -> Forward {
    let d = dims(spec);
    let w1 = &w.tensors[0].values;
    let b1 = &w.tensors[1].values;
    let w2 = &w.tensors[2].values;
    let b2 = &w.tensors[3].values;
    let fcw = &w.tensors[4].values;
    let fcb = &w.tensors[5].values;
    let c = spec.num_classes;

    let mut pre1 = vec![0.0f64; d.c1 * d.r1 * d.r1];
    for o in 0..d.c1 {
        let bias = f64::from(b1[o]);
        for y in 0..d.r1 {
            for xx in 0..d.r1 {
                let mut acc = bias;
                for ky in 0..2 {
                    for kx in 0..2 {
                        acc += f64::from(w1[o * 4 + ky * 2 + kx])
                            * f64::from(x[(y + ky) * d.s + (xx + kx)]);
                    }
                }
                pre1[(o * d.r1 + y) * d.r1 + xx] = acc;
            }
        }
    }
    let a1: Vec<f64> = pre1.iter().map(|&v| v.max(0.0)).collect();

    let mut pre2 = vec![0.0f64; d.c2 * d.r2 * d.r2];
    for o in 0..d.c2 {
        let bias = f64::from(b2[o]);
        for y in 0..d.r2 {
            for xx in 0..d.r2 {
                let mut acc = bias;
                for i in 0..d.c1 {
                    for ky in 0..2 {
                        for kx in 0..2 {
                            acc += f64::from(w2[((o * d.c1 + i) * 2 + ky) * 2 + kx])
                                * a1[(i * d.r1 + y + ky) * d.r1 + xx + kx];
                        }
                    }
                }
                pre2[(o * d.r2 + y) * d.r2 + xx] = acc;
            }
        }
    }
    let a2: Vec<f64> = pre2.iter().map(|&v| v.max(0.0)).collect();

    let mut z: Vec<f64> = fcb.iter().map(|&v| f64::from(v)).collect();
    for (f, &af) in a2.iter().enumerate() {
        if af == 0.0 {
            continue;
        }
        let row = &fcw[f * c..(f + 1) * c];
        for (zk, &wfk) in z.iter_mut().zip(row) {
            *zk += af * f64::from(wfk);
        }
    }

    Forward {
        pre1,
        a1,
        pre2,
        a2,
        z,
    }
}

pub(super) fn logits(spec: &ModelSpec, w: &ParamVector, x: &[f32]) -> Vec<f64> {
    forward(spec, w, x).z
}

/// All ReLU preactivations (conv1 then conv2) for one sample, used by
/// gradient-check probes to stay clear of the kink.
pub(crate) fn preactivations(spec: &ModelSpec, w: &ParamVector, x: &[f32]) -> Vec<f64> {
    let f = forward(spec, w, x);
    let mut out = f.pre1;
    out.extend_from_slice(&f.pre2);
    out
}

pub(super) fn loss_and_grad(spec: &ModelSpec, w: &ParamVector, batch: &Batch) -> (f64, ParamVector) {
    let d = dims(spec);
    let c = spec.num_classes;
    let inv_n = 1.0 / batch.len() as f64;
    let w2 = &w.tensors[2].values;
    let fcw = &w.tensors[4].values;

    let mut dw1 = vec![0.0f64; d.c1 * 4];
    let mut db1 = vec![0.0f64; d.c1];
    let mut dw2 = vec![0.0f64; d.c2 * d.c1 * 4];
    let mut db2 = vec![0.0f64; d.c2];
    let mut dfcw = vec![0.0f64; d.r2 * d.r2 * d.c2 * c];
    let mut dfcb = vec![0.0f64; c];
    let mut loss = 0.0;

    for s in 0..batch.len() {
        let x = batch.row(s);
        let f = forward(spec, w, x);
        let mut z = f.z;
        loss += softmax_xent_inplace(&mut z, batch.labels[s]);
        z[batch.labels[s]] -= 1.0;

        // fully connected head
        let mut da2 = vec![0.0f64; f.a2.len()];
        for (k, &dzk) in z.iter().enumerate() {
            let dzk = dzk * inv_n;
            dfcb[k] += dzk;
            for (fi, &af) in f.a2.iter().enumerate() {
                dfcw[fi * c + k] += af * dzk;
                da2[fi] += f64::from(fcw[fi * c + k]) * dzk;
            }
        }

        // conv2: ReLU gate, then weight/bias gradients and input gradient
        let mut da1 = vec![0.0f64; f.a1.len()];
        for o in 0..d.c2 {
            for y in 0..d.r2 {
                for xx in 0..d.r2 {
                    let idx = (o * d.r2 + y) * d.r2 + xx;
                    if f.pre2[idx] <= 0.0 {
                        continue;
                    }
                    let dp = da2[idx];
                    db2[o] += dp;
                    for i in 0..d.c1 {
                        for ky in 0..2 {
                            for kx in 0..2 {
                                let a1_idx = (i * d.r1 + y + ky) * d.r1 + xx + kx;
                                dw2[((o * d.c1 + i) * 2 + ky) * 2 + kx] += dp * f.a1[a1_idx];
                                da1[a1_idx] +=
                                    dp * f64::from(w2[((o * d.c1 + i) * 2 + ky) * 2 + kx]);
                            }
                        }
                    }
                }
            }
        }

        // conv1: ReLU gate, then weight/bias gradients
        for o in 0..d.c1 {
            for y in 0..d.r1 {
                for xx in 0..d.r1 {
                    let idx = (o * d.r1 + y) * d.r1 + xx;
                    if f.pre1[idx] <= 0.0 {
                        continue;
                    }
                    let dp = da1[idx];
                    db1[o] += dp;
                    for ky in 0..2 {
                        for kx in 0..2 {
                            dw1[o * 4 + ky * 2 + kx] +=
                                dp * f64::from(x[(y + ky) * d.s + (xx + kx)]);
                        }
                    }
                }
            }
        }
    }

    let mut grad = w.zeros_like();
    grad.tensors[0].values = dw1.into_iter().map(|v| v as f32).collect();
    grad.tensors[1].values = db1.into_iter().map(|v| v as f32).collect();
    grad.tensors[2].values = dw2.into_iter().map(|v| v as f32).collect();
    grad.tensors[3].values = db2.into_iter().map(|v| v as f32).collect();
    grad.tensors[4].values = dfcw.into_iter().map(|v| v as f32).collect();
    grad.tensors[5].values = dfcb.into_iter().map(|v| v as f32).collect();
    (loss * inv_n, grad)
}
