//! Trainable models: three small architectures with hand-coded exact
//! gradients, the prox-regularized SGD step, and test-set evaluation.
//!
//! All forward/backward arithmetic accumulates in f64; parameters are stored
//! in f32 (see [`crate::params`]). Gradients are analytic — no autodiff — and
//! are verified against central finite differences in the test suites.

mod cnn;
mod logistic;
mod mlp;

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::rng;

#[cfg(not(feature = "std"))]
use crate::fmath::F64Ext;

/// A minibatch: row-major features with aligned class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `len() × input_dim`, row-major.
    pub features: Vec<f32>,
    pub labels: Vec<usize>,
    pub input_dim: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }
}

/// Network architecture. Widths beyond the fixed kernel sizes are
/// configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "arch")
)]
pub enum Architecture {
    /// Linear softmax classifier.
    #[cfg_attr(feature = "serde", serde(rename = "multinomial-logistic"))]
    MultinomialLogistic,
    /// One ReLU hidden layer of the given width.
    #[cfg_attr(feature = "serde", serde(rename = "mlp-1-hidden"))]
    MlpOneHidden { hidden: usize },
    /// Two 2×2 stride-1 valid convolutions with ReLU, then a fully connected
    /// softmax head. Input must be a square single-channel image.
    #[cfg_attr(feature = "serde", serde(rename = "small-cnn"))]
    SmallCnn {
        conv1_channels: usize,
        conv2_channels: usize,
    },
}

/// Everything needed to lay out parameters and run forward/backward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub architecture: Architecture,
    pub input_dim: usize,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            architecture: Architecture::MultinomialLogistic,
            input_dim,
            num_classes,
        }
    }

    pub fn mlp(input_dim: usize, num_classes: usize, hidden: usize) -> Self {
        ModelSpec {
            architecture: Architecture::MlpOneHidden { hidden },
            input_dim,
            num_classes,
        }
    }

    /// CNN with the default channel plan (8 then 16).
    pub fn small_cnn(input_dim: usize, num_classes: usize) -> Self {
        Self::small_cnn_with_channels(input_dim, num_classes, 8, 16)
    }

    pub fn small_cnn_with_channels(
        input_dim: usize,
        num_classes: usize,
        conv1_channels: usize,
        conv2_channels: usize,
    ) -> Self {
        ModelSpec {
            architecture: Architecture::SmallCnn {
                conv1_channels,
                conv2_channels,
            },
            input_dim,
            num_classes,
        }
    }

    /// Image side length for the CNN (input must be a square image).
    pub(crate) fn image_side(&self) -> usize {
        let mut s = 1;
        while s * s < self.input_dim {
            s += 1;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config(String::from("input_dim must be positive")));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(String::from("need at least 2 classes")));
        }
        match self.architecture {
            Architecture::MultinomialLogistic => {}
            Architecture::MlpOneHidden { hidden } => {
                if hidden == 0 {
                    return Err(Error::Config(String::from("hidden width must be positive")));
                }
            }
            Architecture::SmallCnn {
                conv1_channels,
                conv2_channels,
            } => {
                if conv1_channels == 0 || conv2_channels == 0 {
                    return Err(Error::Config(String::from("channel counts must be positive")));
                }
                let s = self.image_side();
                if s * s != self.input_dim {
                    return Err(Error::Config(alloc::format!(
                        "small-cnn input_dim {} is not a square image",
                        self.input_dim
                    )));
                }
                if s < 3 {
                    return Err(Error::Config(String::from(
                        "small-cnn needs at least a 3×3 image for two 2×2 convolutions",
                    )));
                }
            }
        }
        Ok(())
    }

    /// The deterministic `(name, shape)` layout of this architecture's
    /// parameters.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let d = self.input_dim;
        let c = self.num_classes;
        match self.architecture {
            Architecture::MultinomialLogistic => {
                alloc::vec![("w", alloc::vec![d, c]), ("b", alloc::vec![c])]
            }
            Architecture::MlpOneHidden { hidden } => alloc::vec![
                ("w1", alloc::vec![d, hidden]),
                ("b1", alloc::vec![hidden]),
                ("w2", alloc::vec![hidden, c]),
                ("b2", alloc::vec![c]),
            ],
            Architecture::SmallCnn {
                conv1_channels,
                conv2_channels,
            } => {
                let s = self.image_side();
                let flat = (s - 2) * (s - 2) * conv2_channels;
                alloc::vec![
                    ("conv1_w", alloc::vec![conv1_channels, 1, 2, 2]),
                    ("conv1_b", alloc::vec![conv1_channels]),
                    ("conv2_w", alloc::vec![conv2_channels, conv1_channels, 2, 2]),
                    ("conv2_b", alloc::vec![conv2_channels]),
                    ("fc_w", alloc::vec![flat, c]),
                    ("fc_b", alloc::vec![c]),
                ]
            }
        }
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        self.layout()
            .iter()
            .map(|(_, shape)| shape.iter().product::<usize>())
            .sum()
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Contract(String::from("empty batch")));
        }
        if batch.input_dim != self.input_dim {
            return Err(Error::Contract(alloc::format!(
                "batch feature width {} does not match model input_dim {}",
                batch.input_dim,
                self.input_dim
            )));
        }
        if batch.labels.iter().any(|&l| l >= self.num_classes) {
            return Err(Error::Contract(String::from("label out of class range")));
        }
        Ok(())
    }

    fn check_params(&self, w: &ParamVector) -> Result<()> {
        let expected = self.layout();
        let matches = w.tensors.len() == expected.len()
            && w.tensors
                .iter()
                .zip(&expected)
                .all(|(t, (name, shape))| t.name == *name && &t.shape == shape);
        if matches {
            Ok(())
        } else {
            Err(Error::Contract(String::from(
                "parameter layout does not match the model spec",
            )))
        }
    }
}

/// Draws initial parameters: weights uniform in `(−s, s)` with
/// `s = sqrt(6/(fan_in + fan_out))`, biases zero. Deterministic per
/// `(spec, seed)`.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParamVector {
    let layout = spec.layout();
    let mut w = ParamVector::zeros(&layout);
    let mut r = rng::stream(seed, "init", 0);
    for t in &mut w.tensors {
        let (fan_in, fan_out) = match t.shape.len() {
            1 => continue, // biases stay zero
            2 => (t.shape[0], t.shape[1]),
            4 => (
                t.shape[1] * t.shape[2] * t.shape[3],
                t.shape[0] * t.shape[2] * t.shape[3],
            ),
            _ => unreachable!("no rank-{} tensors in these architectures", t.shape.len()),
        };
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut t.values {
            *v = r.gen_range(-s..s) as f32;
        }
    }
    w
}

/// Mean cross-entropy over the batch and its exact analytic gradient, laid
/// out like `w`.
pub fn loss_and_grad(w: &ParamVector, batch: &Batch, spec: &ModelSpec) -> Result<(f64, ParamVector)> {
    spec.check_params(w)?;
    spec.check_batch(batch)?;
    Ok(match spec.architecture {
        Architecture::MultinomialLogistic => logistic::loss_and_grad(spec, w, batch),
        Architecture::MlpOneHidden { .. } => mlp::loss_and_grad(spec, w, batch),
        Architecture::SmallCnn { .. } => cnn::loss_and_grad(spec, w, batch),
    })
}

/// Class logits for one feature row, in f64.
pub fn logits(w: &ParamVector, x: &[f32], spec: &ModelSpec) -> Vec<f64> {
    debug_assert_eq!(x.len(), spec.input_dim);
    match spec.architecture {
        Architecture::MultinomialLogistic => logistic::logits(spec, w, x),
        Architecture::MlpOneHidden { .. } => mlp::logits(spec, w, x),
        Architecture::SmallCnn { .. } => cnn::logits(spec, w, x),
    }
}

/// All ReLU preactivations of one forward pass, in layer order (empty for
/// the logistic model, which has none).
///
/// Gradient-check probes use this to reject draws that sit too close to the
/// ReLU kink, where finite differences measure a one-sided limit instead of
/// the derivative.
pub fn relu_preactivations(w: &ParamVector, x: &[f32], spec: &ModelSpec) -> Vec<f64> {
    match spec.architecture {
        Architecture::MultinomialLogistic => Vec::new(),
        Architecture::MlpOneHidden { .. } => mlp::preactivations(spec, w, x),
        Architecture::SmallCnn { .. } => cnn::preactivations(spec, w, x),
    }
}

/// One prox-regularized SGD step:
/// `w − η·(∇loss(w) + μ·(w − anchor))`, elementwise in f64.
///
/// With `μ = 0` this is a plain SGD step; the penalty gradient vanishes when
/// `w == anchor` regardless of `μ`.
pub fn prox_sgd_step(
    w: &ParamVector,
    anchor: &ParamVector,
    batch: &Batch,
    eta: f64,
    mu: f64,
    spec: &ModelSpec,
) -> Result<ParamVector> {
    w.check_same_layout(anchor)?;
    let (_, grad) = loss_and_grad(w, batch, spec)?;
    let mut out = w.clone();
    for ((to, gt), at) in out.tensors.iter_mut().zip(&grad.tensors).zip(&anchor.tensors) {
        for ((v, &g), &a) in to.values.iter_mut().zip(&gt.values).zip(&at.values) {
            let wi = f64::from(*v);
            *v = (wi - eta * (f64::from(g) + mu * (wi - f64::from(a)))) as f32;
        }
    }
    Ok(out)
}

/// Runs `epochs` passes of prox-SGD over a seeded shuffle of `indices`,
/// batched at size `batch_size` (the last short batch is kept).
///
/// Epoch `e` shuffles with the stream of `seed + e`, so an `epochs = 2` run
/// is exactly two `epochs = 1` runs seeded `seed` and `seed + 1`.
#[allow(clippy::too_many_arguments)]
pub fn local_train(
    w0: &ParamVector,
    anchor: &ParamVector,
    data: &DatasetHandle,
    indices: &[usize],
    epochs: usize,
    batch_size: usize,
    eta: f64,
    mu: f64,
    seed: u64,
    spec: &ModelSpec,
) -> Result<ParamVector> {
    if indices.is_empty() {
        return Err(Error::UnusableDevice(String::from("device holds no samples")));
    }
    if batch_size == 0 {
        return Err(Error::Config(String::from("batch_size must be positive")));
    }
    let mut w = w0.clone();
    for epoch in 0..epochs {
        let mut order = indices.to_vec();
        order.shuffle(&mut rng::stream(seed.wrapping_add(epoch as u64), "train-shuffle", 0));
        for chunk in order.chunks(batch_size) {
            let batch = data.batch(chunk);
            w = prox_sgd_step(&w, anchor, &batch, eta, mu, spec)?;
        }
    }
    Ok(w)
}

/// Fraction of test samples whose argmax prediction matches the label; logit
/// ties break toward the lowest class index.
pub fn evaluate(w: &ParamVector, testset: &DatasetHandle, spec: &ModelSpec) -> f64 {
    assert!(!testset.is_empty(), "evaluate requires a non-empty test set");
    let mut correct = 0usize;
    for i in 0..testset.num_samples() {
        let z = logits(w, testset.row(i), spec);
        let mut best = 0usize;
        for (c, &v) in z.iter().enumerate().skip(1) {
            if v > z[best] {
                best = c;
            }
        }
        if best == testset.labels[i] {
            correct += 1;
        }
    }
    correct as f64 / testset.num_samples() as f64
}

/// Softmax + cross-entropy for one sample, fused for stability.
///
/// Overwrites `z` (logits in, probabilities out) and returns the negative
/// log-likelihood of `label`.
pub(crate) fn softmax_xent_inplace(z: &mut [f64], label: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    -z[label].ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;
    use approx::assert_relative_eq;

    fn toy_batch(spec: &ModelSpec, seed: u64, n: usize) -> Batch {
        let mut r = rng::seeded_rng(seed);
        Batch {
            features: (0..n * spec.input_dim).map(|_| r.gen_range(0.0..1.0)).collect(),
            labels: (0..n).map(|_| r.gen_range(0..spec.num_classes)).collect(),
            input_dim: spec.input_dim,
        }
    }

    #[test]
    fn layout_parameter_counts() {
        assert_eq!(ModelSpec::logistic(4, 3).param_count(), 4 * 3 + 3);
        assert_eq!(ModelSpec::mlp(8, 10, 16).param_count(), 8 * 16 + 16 + 16 * 10 + 10);
        // 4×4 image: conv1 4·(1·2·2)+4, conv2 8·(4·2·2)+8, fc (2·2·8)·10+10
        assert_eq!(
            ModelSpec::small_cnn_with_channels(16, 10, 4, 8).param_count(),
            (16 + 4) + (128 + 8) + (320 + 10)
        );
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = ModelSpec::mlp(8, 10, 16);
        let a = init_params(&spec, 1);
        let b = init_params(&spec, 1);
        assert!(a.bit_identical(&b));
        assert!(!a.bit_identical(&init_params(&spec, 2)));

        let s1 = (6.0f64 / (8.0 + 16.0)).sqrt() as f32;
        let w1 = a.tensor("w1").unwrap();
        assert!(w1.values.iter().all(|v| v.abs() < s1));
        assert!(a.tensor("b1").unwrap().values.iter().all(|&v| v == 0.0));
        assert!(a.tensor("b2").unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_weights_give_uniform_softmax_loss() {
        for spec in [
            ModelSpec::logistic(6, 4),
            ModelSpec::mlp(6, 4, 5),
            ModelSpec::small_cnn_with_channels(9, 4, 2, 3),
        ] {
            let w = ParamVector::zeros(&spec.layout());
            let batch = toy_batch(&spec, 3, 8);
            let (loss, _) = loss_and_grad(&w, &batch, &spec).unwrap();
            assert_relative_eq!(loss, (spec.num_classes as f64).ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn duplicating_the_batch_changes_nothing() {
        let spec = ModelSpec::mlp(5, 3, 4);
        let w = init_params(&spec, 9);
        let batch = toy_batch(&spec, 4, 6);
        let doubled = Batch {
            features: [batch.features.clone(), batch.features.clone()].concat(),
            labels: [batch.labels.clone(), batch.labels.clone()].concat(),
            input_dim: batch.input_dim,
        };
        let (l1, g1) = loss_and_grad(&w, &batch, &spec).unwrap();
        let (l2, g2) = loss_and_grad(&w, &doubled, &spec).unwrap();
        assert_relative_eq!(l1, l2, max_relative = 1e-12);
        for (a, b) in g1.iter_values().zip(g2.iter_values()) {
            assert_relative_eq!(f64::from(a), f64::from(b), max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    /// Central finite differences on the f64 loss, dividing by the actually
    /// realized f32 step.
    fn fd_gradient(w: &ParamVector, batch: &Batch, spec: &ModelSpec) -> ParamVector {
        let h = 1e-3f64;
        let mut g = w.zeros_like();
        for i in 0..w.element_count() {
            let orig = w.get_flat(i);
            let plus = (f64::from(orig) + h) as f32;
            let minus = (f64::from(orig) - h) as f32;
            let mut wp = w.clone();
            wp.set_flat(i, plus);
            let mut wm = w.clone();
            wm.set_flat(i, minus);
            let (lp, _) = loss_and_grad(&wp, batch, spec).unwrap();
            let (lm, _) = loss_and_grad(&wm, batch, spec).unwrap();
            g.set_flat(i, ((lp - lm) / (f64::from(plus) - f64::from(minus))) as f32);
        }
        g
    }

    /// Finds a `(w, batch)` draw where every ReLU preactivation is at least
    /// `margin` from zero, so central differences never straddle the kink.
    fn kink_safe_probe(spec: &ModelSpec, base_seed: u64, batch_n: usize) -> (ParamVector, Batch) {
        let margin = 5e-3;
        for attempt in 0..10_000u64 {
            let seed = base_seed.wrapping_add(attempt);
            let w = init_params(spec, seed);
            let batch = toy_batch(spec, seed ^ 0x9e3779b9, batch_n);
            let safe = (0..batch.len()).all(|i| {
                relu_preactivations(&w, batch.row(i), spec)
                    .iter()
                    .all(|p| p.abs() > margin)
            });
            if safe {
                return (w, batch);
            }
        }
        panic!("no kink-safe probe found near seed {base_seed}");
    }

    #[test]
    fn gradients_match_finite_differences_smoke() {
        // Full 100-probe suites run in the acceptance tests; this is a quick
        // per-architecture check. Probes keep preactivations away from the
        // ReLU kink, where a finite difference measures a one-sided limit
        // rather than the derivative.
        for spec in [
            ModelSpec::logistic(5, 3),
            ModelSpec::mlp(5, 3, 4),
            ModelSpec::small_cnn_with_channels(16, 3, 2, 3),
        ] {
            let (w, batch) = kink_safe_probe(&spec, 11, 4);
            let (_, g) = loss_and_grad(&w, &batch, &spec).unwrap();
            let fd = fd_gradient(&w, &batch, &spec);
            let rel = g.l2_distance(&fd)
                / fd.iter_values().map(|v| f64::from(v).powi(2)).sum::<f64>().sqrt();
            assert!(rel < 1e-4, "{spec:?}: relative L2 error {rel}");
        }
    }

    #[test]
    fn prox_step_identities() {
        let spec = ModelSpec::logistic(4, 3);
        let w = init_params(&spec, 5);
        let anchor = init_params(&spec, 6);
        let batch = toy_batch(&spec, 7, 5);

        // mu = 0 equals a plain SGD step
        let plain = prox_sgd_step(&w, &anchor, &batch, 0.1, 0.0, &spec).unwrap();
        let (_, g) = loss_and_grad(&w, &batch, &spec).unwrap();
        for ((p, a), gi) in plain.iter_values().zip(w.iter_values()).zip(g.iter_values()) {
            let expect = (f64::from(a) - 0.1 * f64::from(gi)) as f32;
            assert_eq!(p, expect);
        }

        // w == anchor: penalty gradient is zero for any mu
        let at_anchor_mu = prox_sgd_step(&w, &w, &batch, 0.1, 5.0, &spec).unwrap();
        let at_anchor_0 = prox_sgd_step(&w, &w, &batch, 0.1, 0.0, &spec).unwrap();
        assert!(at_anchor_mu.bit_identical(&at_anchor_0));

        // mu = 0.01 against the elementwise formula
        let stepped = prox_sgd_step(&w, &anchor, &batch, 0.2, 0.01, &spec).unwrap();
        for (((s, wi), ai), gi) in stepped
            .iter_values()
            .zip(w.iter_values())
            .zip(anchor.iter_values())
            .zip(g.iter_values())
        {
            let (wi, ai, gi) = (f64::from(wi), f64::from(ai), f64::from(gi));
            let expect = (wi - 0.2 * (gi + 0.01 * (wi - ai))) as f32;
            assert_eq!(s, expect);
        }
    }

    #[test]
    fn local_train_epoch_replay() {
        let spec = ModelSpec::logistic(6, 3);
        let (train, _) = make_blobs(3, 35, 6, 0.3, 21);
        let indices: Vec<usize> = (0..30).collect();
        let w0 = init_params(&spec, 1);
        let anchor = w0.clone();

        let two = local_train(&w0, &anchor, &train, &indices, 2, 7, 0.1, 0.01, 99, &spec).unwrap();
        let one = local_train(&w0, &anchor, &train, &indices, 1, 7, 0.1, 0.01, 99, &spec).unwrap();
        let replay = local_train(&one, &anchor, &train, &indices, 1, 7, 0.1, 0.01, 100, &spec).unwrap();
        assert!(two.bit_identical(&replay), "E=2 equals two chained E=1 runs");

        // single batch when B >= n_k
        let w_once = local_train(&w0, &anchor, &train, &indices, 1, 64, 0.1, 0.0, 5, &spec).unwrap();
        let mut order = indices.clone();
        order.shuffle(&mut rng::stream(5, "train-shuffle", 0));
        let batch = train.batch(&order);
        let expect = prox_sgd_step(&w0, &anchor, &batch, 0.1, 0.0, &spec).unwrap();
        assert!(w_once.bit_identical(&expect));

        // eta = 0 is a no-op
        let frozen = local_train(&w0, &anchor, &train, &indices, 3, 7, 0.0, 0.5, 2, &spec).unwrap();
        assert!(frozen.bit_identical(&w0));

        // empty device errors
        assert!(matches!(
            local_train(&w0, &anchor, &train, &[], 1, 7, 0.1, 0.0, 2, &spec),
            Err(Error::UnusableDevice(_))
        ));
    }

    #[test]
    fn evaluate_tie_break_and_shift_invariance() {
        let spec = ModelSpec::logistic(4, 10);
        let (_, test) = make_blobs(10, 70, 4, 0.4, 3);
        let zero = ParamVector::zeros(&spec.layout());
        // all logits equal → always predicts class 0
        let class0 = test.labels.iter().filter(|&&l| l == 0).count() as f64 / test.num_samples() as f64;
        assert_eq!(evaluate(&zero, &test, &spec), class0);

        // adding a constant to every class bias does not change predictions
        let w = init_params(&spec, 8);
        let mut shifted = w.clone();
        for v in &mut shifted.tensors[1].values {
            *v += 3.25;
        }
        assert_eq!(evaluate(&w, &test, &spec), evaluate(&shifted, &test, &spec));
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let spec = ModelSpec::logistic(8, 5);
        let (train, test) = make_blobs(5, 140, 8, 0.02, 13);
        let mut w = init_params(&spec, 1);
        let anchor = w.clone();
        let indices: Vec<usize> = (0..train.num_samples()).collect();
        for epoch in 0..40 {
            w = local_train(&w, &anchor, &train, &indices, 1, 32, 0.5, 0.0, epoch, &spec).unwrap();
        }
        let acc = evaluate(&w, &test, &spec);
        assert!(acc >= 0.99, "nearly separable blobs should fit: acc {acc}");
    }

    #[test]
    fn full_batch_steps_decrease_loss() {
        let spec = ModelSpec::mlp(6, 3, 8);
        let mut w = init_params(&spec, 44);
        let batch = toy_batch(&spec, 45, 32);
        let mut decreases = 0;
        let mut prev = loss_and_grad(&w, &batch, &spec).unwrap().0;
        for _ in 0..50 {
            w = prox_sgd_step(&w, &w.clone(), &batch, 0.05, 0.0, &spec).unwrap();
            let (loss, _) = loss_and_grad(&w, &batch, &spec).unwrap();
            if loss < prev {
                decreases += 1;
            }
            prev = loss;
        }
        assert!(decreases >= 45, "only {decreases}/50 steps decreased the loss");
    }
}
