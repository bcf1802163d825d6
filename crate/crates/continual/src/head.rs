//! Linear softmax classifier over frozen feature vectors.
//!
//! The head is the only trainable component of the engine: a `C x D` weight
//! matrix plus per-class biases, trained with plain minibatch SGD on the
//! cross-entropy loss. Training supports a per-class freeze mask and early
//! stopping on a held-out slice, both of which the strategy layer relies on.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::stream::FrameSample;
use crate::util::mix_seed;

/// Class scores: `weights` is `num_classes x feature_dim`, `biases` has one
/// entry per class. Throughout the crate the bias vector is treated as an
/// extra weight column, so per-class operations (freeze, copy, consolidate)
/// always cover it.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl SoftmaxHead {
    /// All-zero head.
    pub fn zeros(num_classes: usize, feature_dim: usize) -> Result<Self> {
        if num_classes == 0 || feature_dim == 0 {
            return Err(Error::Config(
                "a head needs at least one class and one feature dimension".into(),
            ));
        }
        Ok(Self {
            weights: Array2::zeros((num_classes, feature_dim)),
            biases: Array1::zeros(num_classes),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// Gradient of the mean cross-entropy loss, shaped like the head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Minibatch SGD settings.
///
/// `holdout_fraction` of the samples (at least one, when early stopping is
/// active) is split off before training; after each epoch the holdout
/// accuracy is measured and training stops once it has not improved for
/// `early_stop_patience` consecutive epochs. The head with the best holdout
/// accuracy is returned. `early_stop_patience = 0` disables the mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Mean of the Gaussian weight initialization.
    pub init_mean: f64,
    /// Standard deviation of the Gaussian weight initialization.
    pub init_std: f64,
    pub early_stop_patience: usize,
    pub holdout_fraction: f64,
    /// Seeds initialization, the holdout split and per-epoch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 20,
            minibatch_size: 32,
            init_mean: 0.0,
            init_std: 0.01,
            early_stop_patience: 3,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.minibatch_size == 0 {
            return Err(Error::Config("minibatch_size must be at least 1".into()));
        }
        if !self.init_mean.is_finite() || !self.init_std.is_finite() || self.init_std < 0.0 {
            return Err(Error::Config(format!(
                "weight initialization ({}, {}) must be finite with non-negative deviation",
                self.init_mean, self.init_std
            )));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!(
                "holdout_fraction must be in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

// Per-purpose RNG stream tags; see util::mix_seed.
const INIT_STREAM: u64 = 1;
const HOLDOUT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

/// Fresh head with `Normal(init_mean, init_std)` weights and zero biases.
/// Identical `(dims, config)` inputs produce identical heads.
pub fn init_head(num_classes: usize, feature_dim: usize, config: &TrainConfig) -> Result<SoftmaxHead> {
    config.validate()?;
    let mut head = SoftmaxHead::zeros(num_classes, feature_dim)?;
    let normal = Normal::new(config.init_mean, config.init_std)
        .map_err(|e| Error::Config(format!("invalid weight initialization: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, INIT_STREAM, 0));
    for v in head.weights.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    Ok(head)
}

fn check_features(head: &SoftmaxHead, features: &[f64]) -> Result<()> {
    if features.len() != head.feature_dim() {
        return Err(Error::Shape(format!(
            "feature vector has length {}, head expects {}",
            features.len(),
            head.feature_dim()
        )));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite feature component".into()));
    }
    Ok(())
}

/// Numerically stable in-place softmax over one score row.
fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest entry; ties break toward the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Class probabilities for one feature vector. Entries are positive and sum
/// to one; the computation subtracts the max logit first, so scores far
/// outside the unit range stay stable.
pub fn forward(head: &SoftmaxHead, features: &[f64]) -> Result<Vec<f64>> {
    check_features(head, features)?;
    let mut scores: Vec<f64> = head
        .weights
        .rows()
        .into_iter()
        .zip(head.biases.iter())
        .map(|(row, &b)| row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + b)
        .collect();
    softmax_in_place(&mut scores);
    Ok(scores)
}

/// Predicted class: argmax of [`forward`]. Softmax preserves score order, so
/// this is computed on the raw scores directly.
pub fn predict(head: &SoftmaxHead, features: &[f64]) -> Result<usize> {
    check_features(head, features)?;
    let scores: Vec<f64> = head
        .weights
        .rows()
        .into_iter()
        .zip(head.biases.iter())
        .map(|(row, &b)| row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + b)
        .collect();
    Ok(argmax(&scores))
}

/// Stacks samples into a row-major feature matrix plus a label vector.
pub(crate) fn stack_samples(
    samples: &[FrameSample],
    num_classes: usize,
    feature_dim: usize,
) -> Result<(Array2<f64>, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::Usage("sample list is empty".into()));
    }
    let mut x = Array2::zeros((samples.len(), feature_dim));
    let mut labels = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if s.features.len() != feature_dim {
            return Err(Error::Shape(format!(
                "sample {i}: feature vector has length {}, expected {feature_dim}",
                s.features.len()
            )));
        }
        if s.object_class >= num_classes {
            return Err(Error::Shape(format!(
                "sample {i}: label {} out of range for {num_classes} classes",
                s.object_class
            )));
        }
        x.row_mut(i)
            .iter_mut()
            .zip(&s.features)
            .for_each(|(dst, &src)| *dst = src);
        labels.push(s.object_class);
    }
    Ok((x, labels))
}

/// Raw class scores for a feature matrix: `x . W^T + b`, one row per sample.
/// The result is in standard layout, so rows are contiguous slices.
pub(crate) fn score_matrix(head: &SoftmaxHead, x: &Array2<f64>) -> Array2<f64> {
    let mut scores = x.dot(&head.weights.t());
    if !scores.is_standard_layout() {
        // dot may hand back a transposed layout for degenerate shapes.
        scores = scores.as_standard_layout().into_owned();
    }
    scores += &head.biases;
    scores
}

/// Softmaxes every row of a score matrix in place and returns it.
pub(crate) fn softmax_rows(mut scores: Array2<f64>) -> Array2<f64> {
    for mut row in scores.rows_mut() {
        softmax_in_place(row.as_slice_mut().expect("row-major score matrix"));
    }
    scores
}

/// Mean cross-entropy and its exact gradient over a stacked batch.
fn batch_loss_grad(
    head: &SoftmaxHead,
    x: &Array2<f64>,
    labels: &[usize],
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = labels.len();
    let mut p = score_matrix(head, x);
    let mut loss = 0.0;
    for (i, mut row) in p.rows_mut().into_iter().enumerate() {
        let row = row.as_slice_mut().expect("row-major score matrix");
        softmax_in_place(row);
        loss -= row[labels[i]].max(f64::MIN_POSITIVE).ln();
    }
    loss /= n as f64;
    for (i, &label) in labels.iter().enumerate() {
        p[[i, label]] -= 1.0;
    }
    p /= n as f64;
    let grad_w = p.t().dot(x);
    let grad_b = p.sum_axis(Axis(0));
    (loss, grad_w, grad_b)
}

/// Mean cross-entropy loss and exact gradient of the head over `samples`.
pub fn loss_and_gradient(head: &SoftmaxHead, samples: &[FrameSample]) -> Result<(f64, HeadGradient)> {
    let (x, labels) = stack_samples(samples, head.num_classes(), head.feature_dim())?;
    let (loss, grad_w, grad_b) = batch_loss_grad(head, &x, &labels);
    Ok((
        loss,
        HeadGradient {
            weights: grad_w,
            biases: grad_b,
        },
    ))
}

/// Per-row argmax over raw scores for a stacked feature matrix.
pub(crate) fn predict_matrix(head: &SoftmaxHead, x: &Array2<f64>) -> Vec<usize> {
    let scores = score_matrix(head, x);
    scores
        .rows()
        .into_iter()
        .map(|row| argmax(row.as_slice().expect("row-major score matrix")))
        .collect()
}

/// Trains a copy of `head` with minibatch SGD and returns it along with the
/// per-epoch mean loss trace.
///
/// `freeze_mask[c] = true` pins class `c`: its weight row and bias come out
/// bit-identical to the input. Sample order is reshuffled every epoch from
/// `config.seed`; identical inputs produce identical outputs.
pub fn sgd_train(
    head: &SoftmaxHead,
    samples: &[FrameSample],
    config: &TrainConfig,
    freeze_mask: Option<&[bool]>,
) -> Result<(SoftmaxHead, Vec<f64>)> {
    config.validate()?;
    let num_classes = head.num_classes();
    if let Some(mask) = freeze_mask {
        if mask.len() != num_classes {
            return Err(Error::Shape(format!(
                "freeze mask has {} entries, head has {num_classes} classes",
                mask.len()
            )));
        }
    }
    let (x, labels) = stack_samples(samples, num_classes, head.feature_dim())?;
    let n = labels.len();

    let holdout_len = if config.early_stop_patience > 0 {
        ((n as f64) * config.holdout_fraction).floor() as usize
    } else {
        0
    };
    let early_stopping = holdout_len >= 1 && holdout_len < n;

    let mut order: Vec<usize> = (0..n).collect();
    let holdout: Vec<usize> = if early_stopping {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, HOLDOUT_STREAM, 0));
        order.shuffle(&mut rng);
        order.drain(..holdout_len).collect()
    } else {
        Vec::new()
    };
    let (holdout_x, holdout_labels) = if early_stopping {
        let hx = x.select(Axis(0), &holdout);
        let hl: Vec<usize> = holdout.iter().map(|&i| labels[i]).collect();
        (hx, hl)
    } else {
        (Array2::zeros((0, 0)), Vec::new())
    };

    let mut current = head.clone();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, SHUFFLE_STREAM, 0));
    let mut best: Option<(f64, SoftmaxHead)> = None;
    let mut epochs_since_best = 0;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut minibatches = 0usize;
        for chunk in order.chunks(config.minibatch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grad_w, grad_b) = batch_loss_grad(&current, &xb, &yb);
            epoch_loss += loss;
            minibatches += 1;
            for c in 0..num_classes {
                if freeze_mask.is_some_and(|m| m[c]) {
                    continue;
                }
                current
                    .weights
                    .row_mut(c)
                    .scaled_add(-config.learning_rate, &grad_w.row(c));
                current.biases[c] -= config.learning_rate * grad_b[c];
            }
        }
        trace.push(epoch_loss / minibatches as f64);

        if early_stopping {
            let predictions = predict_matrix(&current, &holdout_x);
            let correct = predictions
                .iter()
                .zip(&holdout_labels)
                .filter(|(p, l)| p == l)
                .count();
            let accuracy = correct as f64 / holdout_labels.len() as f64;
            let improved = best.as_ref().is_none_or(|(b, _)| accuracy > *b);
            if improved {
                best = Some((accuracy, current.clone()));
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= config.early_stop_patience {
                    break;
                }
            }
        }
    }

    let result = match best {
        Some((_, head)) => head,
        None => current,
    };
    Ok((result, trace))
}
