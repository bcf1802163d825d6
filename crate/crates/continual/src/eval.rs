//! Test-set evaluation: accuracy protocols, the rejection option and
//! temporal fusion of per-frame scores.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::head::{argmax, predict_matrix, score_matrix, softmax_rows, stack_samples, SoftmaxHead};
use crate::stream::FeatureDataset;

/// Label granularity. Category-level accuracy maps the *predicted object
/// class* to its category and compares against the sample's category label;
/// the head itself always scores object classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Object,
    Category,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::Object => "object",
            Level::Category => "category",
        })
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "object" => Ok(Level::Object),
            "category" => Ok(Level::Category),
            other => Err(Error::Usage(format!(
                "unknown level {other:?}; expected object or category"
            ))),
        }
    }
}

/// Which slice of the test set an accuracy is computed over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolKind {
    /// Only samples whose class has already been presented for training.
    PartialTestSet,
    /// The whole test set, unseen classes included.
    FullTestSet,
    /// The whole test set with a rejection option: a prediction whose top
    /// probability falls below `threshold` is rejected. A seen-class sample
    /// scores when accepted and classified correctly; an unseen-class sample
    /// scores when rejected.
    RejectionFullTestSet { threshold: f64 },
}

/// Evaluation protocol: a test-set slice plus a label granularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalProtocol {
    pub kind: ProtocolKind,
    pub level: Level,
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if let ProtocolKind::RejectionFullTestSet { threshold } = self.kind {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::Config(format!(
                    "rejection threshold must be in [0, 1], got {threshold}"
                )));
            }
        }
        Ok(())
    }
}

/// Test set stacked into a feature matrix for repeated evaluation.
#[derive(Debug, Clone)]
pub struct EvalSet {
    features: Array2<f64>,
    object_labels: Vec<usize>,
    category_labels: Vec<usize>,
    class_to_category: Vec<usize>,
}

impl EvalSet {
    pub fn new(test: &FeatureDataset) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::Usage("test set is empty".into()));
        }
        let (features, object_labels) =
            stack_samples(&test.samples, test.num_classes, test.feature_dim)?;
        let category_labels = test.samples.iter().map(|s| s.category).collect();
        Ok(Self {
            features,
            object_labels,
            category_labels,
            class_to_category: test.class_to_category.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.object_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.object_labels.is_empty()
    }

    fn check_head(&self, head: &SoftmaxHead) -> Result<()> {
        if head.feature_dim() != self.features.ncols() {
            return Err(Error::Shape(format!(
                "head expects {} features, test set has {}",
                head.feature_dim(),
                self.features.ncols()
            )));
        }
        if head.num_classes() != self.class_to_category.len() {
            return Err(Error::Shape(format!(
                "head has {} classes, test set metadata has {}",
                head.num_classes(),
                self.class_to_category.len()
            )));
        }
        Ok(())
    }

    /// Whether a prediction for sample `i` is correct at `level`.
    fn correct(&self, i: usize, predicted: usize, level: Level) -> bool {
        match level {
            Level::Object => predicted == self.object_labels[i],
            Level::Category => self.class_to_category[predicted] == self.category_labels[i],
        }
    }
}

/// Accuracy of `head` on a prepared test set under `protocol`.
///
/// `seen_classes` are the classes presented for training so far. The partial
/// protocol restricts scoring to their samples and requires both a non-empty
/// set and a non-empty restriction; the rejection protocol uses them for the
/// seen/unseen split described on [`ProtocolKind`].
pub fn evaluate_set(
    head: &SoftmaxHead,
    set: &EvalSet,
    protocol: &EvalProtocol,
    seen_classes: &BTreeSet<usize>,
) -> Result<f64> {
    protocol.validate()?;
    set.check_head(head)?;
    if let Some(&bad) = seen_classes.iter().find(|&&c| c >= head.num_classes()) {
        return Err(Error::Protocol(format!(
            "seen class {bad} out of range for {} classes",
            head.num_classes()
        )));
    }

    match protocol.kind {
        ProtocolKind::PartialTestSet => {
            if seen_classes.is_empty() {
                return Err(Error::Usage(
                    "the partial protocol needs a non-empty seen class set".into(),
                ));
            }
            let predictions = predict_matrix(head, &set.features);
            let mut kept = 0usize;
            let mut correct = 0usize;
            for (i, &label) in set.object_labels.iter().enumerate() {
                if seen_classes.contains(&label) {
                    kept += 1;
                    if set.correct(i, predictions[i], protocol.level) {
                        correct += 1;
                    }
                }
            }
            if kept == 0 {
                return Err(Error::Protocol(
                    "no test sample belongs to a seen class".into(),
                ));
            }
            Ok(correct as f64 / kept as f64)
        }
        ProtocolKind::FullTestSet => {
            let predictions = predict_matrix(head, &set.features);
            let correct = predictions
                .iter()
                .enumerate()
                .filter(|&(i, &p)| set.correct(i, p, protocol.level))
                .count();
            Ok(correct as f64 / set.len() as f64)
        }
        ProtocolKind::RejectionFullTestSet { threshold } => {
            let probabilities = softmax_rows(score_matrix(head, &set.features));
            let mut scored = 0usize;
            for (i, row) in probabilities.rows().into_iter().enumerate() {
                let row = row.as_slice().expect("row-major probability matrix");
                let decision = reject_predict(row, threshold);
                let ok = match decision {
                    Some(predicted) if seen_classes.contains(&set.object_labels[i]) => {
                        set.correct(i, predicted, protocol.level)
                    }
                    Some(_) => false,
                    None => !seen_classes.contains(&set.object_labels[i]),
                };
                if ok {
                    scored += 1;
                }
            }
            Ok(scored as f64 / set.len() as f64)
        }
    }
}

/// Convenience wrapper over [`evaluate_set`] that stacks `test` first.
pub fn evaluate(
    head: &SoftmaxHead,
    test: &FeatureDataset,
    protocol: &EvalProtocol,
    seen_classes: &BTreeSet<usize>,
) -> Result<f64> {
    let set = EvalSet::new(test)?;
    evaluate_set(head, &set, protocol, seen_classes)
}

/// Prediction with a rejection option: `None` when the top probability falls
/// below `threshold`, otherwise the argmax class (ties toward the lowest
/// id). A threshold of 0 accepts everything; a threshold above 1 rejects
/// everything.
pub fn reject_predict(probabilities: &[f64], threshold: f64) -> Option<usize> {
    if probabilities.is_empty() {
        return None;
    }
    let best = argmax(probabilities);
    if probabilities[best] < threshold {
        None
    } else {
        Some(best)
    }
}

/// One point of a rejection sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Object-level accuracy over the accepted samples; 0 when everything
    /// was rejected.
    pub accuracy_on_accepted: f64,
    /// Fraction of test samples rejected.
    pub rejection_rate: f64,
}

/// Sweeps the rejection threshold over a test set.
///
/// `thresholds` must be non-empty and sorted ascending; `rejection_rate` is
/// then non-decreasing across the returned points. `seen_classes` documents
/// which classes were trained; the open-set score that combines acceptance
/// and correctness per sample is available through [`evaluate`] with
/// [`ProtocolKind::RejectionFullTestSet`].
pub fn roc_sweep(
    head: &SoftmaxHead,
    test: &FeatureDataset,
    seen_classes: &BTreeSet<usize>,
    thresholds: &[f64],
) -> Result<Vec<RocPoint>> {
    if thresholds.is_empty() {
        return Err(Error::Usage("threshold list is empty".into()));
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::Usage("thresholds must be finite".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("thresholds must be sorted ascending".into()));
    }
    if let Some(&bad) = seen_classes.iter().find(|&&c| c >= head.num_classes()) {
        return Err(Error::Protocol(format!(
            "seen class {bad} out of range for {} classes",
            head.num_classes()
        )));
    }
    let set = EvalSet::new(test)?;
    set.check_head(head)?;

    let probabilities = softmax_rows(score_matrix(head, &set.features));
    let n = set.len();
    let top: Vec<(f64, usize)> = probabilities
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.as_slice().expect("row-major probability matrix");
            let best = argmax(row);
            (row[best], best)
        })
        .collect();

    let points = thresholds
        .iter()
        .map(|&threshold| {
            let mut accepted = 0usize;
            let mut correct = 0usize;
            let mut rejected = 0usize;
            for (i, &(p, predicted)) in top.iter().enumerate() {
                if p < threshold {
                    rejected += 1;
                } else {
                    accepted += 1;
                    if predicted == set.object_labels[i] {
                        correct += 1;
                    }
                }
            }
            let accuracy_on_accepted = if accepted == 0 {
                0.0
            } else {
                correct as f64 / accepted as f64
            };
            RocPoint {
                threshold,
                accuracy_on_accepted,
                rejection_rate: rejected as f64 / n as f64,
            }
        })
        .collect();
    Ok(points)
}

/// Temporal fusion settings: a trailing window of `window` frames summed by
/// the sum rule. With `reset_at_sequence_start` the window is truncated at
/// sequence boundaries, modeling a detector that knows when a new object
/// appears; without it the window runs across boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionConfig {
    pub window: usize,
    pub reset_at_sequence_start: bool,
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("fusion window must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_sequence_starts(n: usize, starts: &[usize]) -> Result<()> {
    if n == 0 {
        return Err(Error::Usage("no frames to fuse".into()));
    }
    if starts.first() != Some(&0) {
        return Err(Error::Usage("sequence starts must begin with frame 0".into()));
    }
    if starts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("sequence starts must be strictly increasing".into()));
    }
    if *starts.last().expect("checked non-empty") >= n {
        return Err(Error::Usage("sequence start beyond the last frame".into()));
    }
    Ok(())
}

/// Fused per-frame predictions: frame `t` is classified by the argmax of the
/// *sum* of the confidence vectors in its trailing window. Sums are computed
/// fresh per frame, so a window of 1 reproduces the frame-level predictions
/// exactly, bit for bit.
pub fn temporal_fuse_predictions(
    confidences: &[Vec<f64>],
    sequence_starts: &[usize],
    config: &FusionConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    let n = confidences.len();
    check_sequence_starts(n, sequence_starts)?;
    let width = confidences[0].len();
    if width == 0 {
        return Err(Error::Shape("confidence vectors are empty".into()));
    }
    if confidences.iter().any(|c| c.len() != width) {
        return Err(Error::Shape("confidence vectors have mixed lengths".into()));
    }

    // start_of[t] = first frame of the sequence containing t.
    let mut start_of = vec![0usize; n];
    let mut s = 0usize;
    for t in 0..n {
        if s + 1 < sequence_starts.len() && sequence_starts[s + 1] == t {
            s += 1;
        }
        start_of[t] = sequence_starts[s];
    }

    let mut fused = vec![0.0f64; width];
    let mut predictions = Vec::with_capacity(n);
    for t in 0..n {
        let lower = t.saturating_sub(config.window - 1);
        let from = if config.reset_at_sequence_start {
            lower.max(start_of[t])
        } else {
            lower
        };
        fused.iter_mut().for_each(|v| *v = 0.0);
        for row in &confidences[from..=t] {
            for (acc, &v) in fused.iter_mut().zip(row) {
                *acc += v;
            }
        }
        predictions.push(argmax(&fused));
    }
    Ok(predictions)
}

/// Accuracy of the fused predictions against object-class labels.
pub fn temporal_fuse(
    confidences: &[Vec<f64>],
    labels: &[usize],
    sequence_starts: &[usize],
    config: &FusionConfig,
) -> Result<f64> {
    if labels.len() != confidences.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} confidence vectors",
            labels.len(),
            confidences.len()
        )));
    }
    let predictions = temporal_fuse_predictions(confidences, sequence_starts, config)?;
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}
