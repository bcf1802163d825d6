//! Training strategies over a sequence of batches.
//!
//! Five strategies share one linear head architecture:
//!
//! - **naive**: keep training the same head on each new batch;
//! - **cumulative**: retrain a fresh head on everything seen so far (the
//!   upper-bound reference);
//! - **cwr**: two weight memories. A consolidated bank `cw` is used for
//!   inference and never trained directly; a temporary head `tw` is
//!   re-initialized before every batch, trained on that batch only, and then
//!   merged into `cw` by a per-class running average;
//! - **cw**: cwr without the re-initialization of `tw`;
//! - **fw**: a single head where weight rows of classes seen in earlier
//!   batches are frozen.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::head::{init_head, sgd_train, SoftmaxHead, TrainConfig};
use crate::stream::FrameSample;

/// Two-memory weight store for the cwr/cw strategies.
///
/// `updates[i]` counts the batches whose class set contained `i`. Classes
/// with `updates[i] = 0` have an all-zero row in `cw` (bias included).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    /// Consolidated weights; the inference head.
    pub cw: SoftmaxHead,
    /// Temporary weights trained on the current batch.
    pub tw: SoftmaxHead,
    pub updates: Vec<u64>,
}

/// Store with all-zero memories and update counts.
pub fn new_store(num_classes: usize, feature_dim: usize) -> Result<WeightStore> {
    Ok(WeightStore {
        cw: SoftmaxHead::zeros(num_classes, feature_dim)?,
        tw: SoftmaxHead::zeros(num_classes, feature_dim)?,
        updates: vec![0; num_classes],
    })
}

fn check_batch_classes(num_classes: usize, batch_classes: &BTreeSet<usize>) -> Result<()> {
    if batch_classes.is_empty() {
        return Err(Error::Protocol("batch class set is empty".into()));
    }
    if let Some(&bad) = batch_classes.iter().find(|&&c| c >= num_classes) {
        return Err(Error::Protocol(format!(
            "batch class {bad} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}

/// Trains `tw` on one batch. With `reinit` set (the cwr strategy), `tw` is
/// first replaced by a fresh [`init_head`] draw; without it (the cw
/// strategy), training continues from the current `tw`.
///
/// Every sample label must be a member of `batch_classes` and vice versa;
/// a mismatch is a protocol violation. `cw` and `updates` are untouched.
pub fn cwr_train_batch(
    store: &WeightStore,
    batch: &[FrameSample],
    batch_classes: &BTreeSet<usize>,
    config: &TrainConfig,
    reinit: bool,
) -> Result<WeightStore> {
    let num_classes = store.cw.num_classes();
    check_batch_classes(num_classes, batch_classes)?;
    let present: BTreeSet<usize> = batch.iter().map(|s| s.object_class).collect();
    if present != *batch_classes {
        return Err(Error::Protocol(format!(
            "batch labels {present:?} do not match the declared class set {batch_classes:?}"
        )));
    }
    let start = if reinit {
        init_head(num_classes, store.cw.feature_dim(), config)?
    } else {
        store.tw.clone()
    };
    let (tw, _) = sgd_train(&start, batch, config, None)?;
    Ok(WeightStore {
        cw: store.cw.clone(),
        tw,
        updates: store.updates.clone(),
    })
}

/// Merges the trained `tw` rows of `batch_classes` into `cw` and bumps the
/// update counts. For a first-time class the row is copied; otherwise
///
/// ```text
/// cw[i] <- (cw[i] * updates[i] + tw[i]) / (updates[i] + 1)
/// ```
///
/// so `cw[i]` stays the arithmetic mean of all `tw[i]` snapshots that were
/// consolidated for class `i`. Biases participate as an extra weight column.
/// Rows of classes outside `batch_classes` are not touched at all.
pub fn cwr_consolidate(store: &WeightStore, batch_classes: &BTreeSet<usize>) -> Result<WeightStore> {
    check_batch_classes(store.cw.num_classes(), batch_classes)?;
    let mut out = store.clone();
    for &class in batch_classes {
        let count = out.updates[class];
        if count == 0 {
            out.cw.weights.row_mut(class).assign(&store.tw.weights.row(class));
            out.cw.biases[class] = store.tw.biases[class];
        } else {
            let n = count as f64;
            let mut row = out.cw.weights.row_mut(class);
            row.zip_mut_with(&store.tw.weights.row(class), |c, &t| {
                *c = (*c * n + t) / (n + 1.0);
            });
            out.cw.biases[class] = (out.cw.biases[class] * n + store.tw.biases[class]) / (n + 1.0);
        }
        out.updates[class] = count + 1;
    }
    Ok(out)
}

/// One batch of the fw strategy: trains the head with rows of
/// `seen_classes` frozen. The caller extends `seen_classes` afterwards.
pub fn fw_train_batch(
    head: &SoftmaxHead,
    batch: &[FrameSample],
    seen_classes: &BTreeSet<usize>,
    config: &TrainConfig,
) -> Result<SoftmaxHead> {
    let num_classes = head.num_classes();
    if let Some(&bad) = seen_classes.iter().find(|&&c| c >= num_classes) {
        return Err(Error::Protocol(format!(
            "seen class {bad} out of range for {num_classes} classes"
        )));
    }
    let mask: Vec<bool> = (0..num_classes).map(|c| seen_classes.contains(&c)).collect();
    let (trained, _) = sgd_train(head, batch, config, Some(&mask))?;
    Ok(trained)
}

/// One batch of the naive strategy: plain continued training.
pub fn naive_update(
    head: &SoftmaxHead,
    batch: &[FrameSample],
    config: &TrainConfig,
) -> Result<SoftmaxHead> {
    let (trained, _) = sgd_train(head, batch, config, None)?;
    Ok(trained)
}

/// One batch of the cumulative strategy: retrains a fresh head on the
/// concatenation of every batch so far.
///
/// Samples are put into a canonical (class, session, frame) order before
/// training, so the result does not depend on how the history was chunked
/// into batches.
pub fn cumulative_update(
    num_classes: usize,
    feature_dim: usize,
    batches: &[&[FrameSample]],
    config: &TrainConfig,
) -> Result<SoftmaxHead> {
    let mut all: Vec<FrameSample> = batches.iter().flat_map(|b| b.iter().cloned()).collect();
    all.sort_by_key(|s| (s.object_class, s.session, s.frame_index));
    let head = init_head(num_classes, feature_dim, config)?;
    let (trained, _) = sgd_train(&head, &all, config, None)?;
    Ok(trained)
}

/// Strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Naive,
    Cumulative,
    Cwr,
    Cw,
    Fw,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Naive,
        StrategyKind::Cumulative,
        StrategyKind::Cwr,
        StrategyKind::Cw,
        StrategyKind::Fw,
    ];
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StrategyKind::Naive => "naive",
            StrategyKind::Cumulative => "cumulative",
            StrategyKind::Cwr => "cwr",
            StrategyKind::Cw => "cw",
            StrategyKind::Fw => "fw",
        };
        f.write_str(name)
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(StrategyKind::Naive),
            "cumulative" => Ok(StrategyKind::Cumulative),
            "cwr" => Ok(StrategyKind::Cwr),
            "cw" => Ok(StrategyKind::Cw),
            "fw" => Ok(StrategyKind::Fw),
            other => Err(Error::Usage(format!(
                "unknown strategy {other:?}; expected naive, cumulative, cwr, cw or fw"
            ))),
        }
    }
}

/// Mutable state of one strategy across the batches of a run.
#[derive(Debug, Clone)]
pub enum StrategyState {
    Naive {
        head: SoftmaxHead,
    },
    Cumulative {
        head: SoftmaxHead,
        history: Vec<FrameSample>,
    },
    Cwr {
        store: WeightStore,
        reinit: bool,
    },
    Fw {
        head: SoftmaxHead,
        seen: BTreeSet<usize>,
    },
}

impl StrategyState {
    /// Initial state before the first batch. `config` seeds the initial head
    /// of the naive and fw strategies.
    pub fn new(
        kind: StrategyKind,
        num_classes: usize,
        feature_dim: usize,
        config: &TrainConfig,
    ) -> Result<Self> {
        Ok(match kind {
            StrategyKind::Naive => StrategyState::Naive {
                head: init_head(num_classes, feature_dim, config)?,
            },
            StrategyKind::Cumulative => StrategyState::Cumulative {
                head: SoftmaxHead::zeros(num_classes, feature_dim)?,
                history: Vec::new(),
            },
            StrategyKind::Cwr => StrategyState::Cwr {
                store: new_store(num_classes, feature_dim)?,
                reinit: true,
            },
            StrategyKind::Cw => StrategyState::Cwr {
                store: new_store(num_classes, feature_dim)?,
                reinit: false,
            },
            StrategyKind::Fw => StrategyState::Fw {
                head: init_head(num_classes, feature_dim, config)?,
                seen: BTreeSet::new(),
            },
        })
    }

    /// Consumes one training batch. `batch_classes` must be exactly the set
    /// of labels present in `batch`.
    pub fn process_batch(
        &mut self,
        batch: &[FrameSample],
        batch_classes: &BTreeSet<usize>,
        config: &TrainConfig,
    ) -> Result<()> {
        match self {
            StrategyState::Naive { head } => {
                *head = naive_update(head, batch, config)?;
            }
            StrategyState::Cumulative { head, history } => {
                history.extend(batch.iter().cloned());
                *head =
                    cumulative_update(head.num_classes(), head.feature_dim(), &[history.as_slice()], config)?;
            }
            StrategyState::Cwr { store, reinit } => {
                *store = cwr_train_batch(store, batch, batch_classes, config, *reinit)?;
                *store = cwr_consolidate(store, batch_classes)?;
            }
            StrategyState::Fw { head, seen } => {
                *head = fw_train_batch(head, batch, seen, config)?;
                seen.extend(batch_classes.iter().copied());
            }
        }
        Ok(())
    }

    /// Head used for evaluation: the consolidated bank for cwr/cw, the live
    /// head otherwise.
    pub fn inference_head(&self) -> &SoftmaxHead {
        match self {
            StrategyState::Naive { head } => head,
            StrategyState::Cumulative { head, .. } => head,
            StrategyState::Cwr { store, .. } => &store.cw,
            StrategyState::Fw { head, .. } => head,
        }
    }
}
