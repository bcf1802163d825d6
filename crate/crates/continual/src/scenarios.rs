//! Scenario schedules and experiment orchestration.
//!
//! A *schedule* partitions the training sequences into an ordered list of
//! batches according to one of three protocols:
//!
//! - **NI** (new instances): one batch per training session; every class is
//!   present from the first batch and later batches add new instances only;
//! - **NC** (new classes): classes are partitioned across batches, each
//!   batch carrying all training sessions of its classes; the first batch is
//!   twice as large as the rest and spreads classes across categories;
//! - **NIC** (new instances and classes): single-session batches. The first
//!   holds one sequence each for a category-spread selection of classes;
//!   every later batch holds sequences of distinct classes, so new classes
//!   and new instances of known classes intermix.
//!
//! [`run_experiment`] repeats a (scenario, strategy) pair over several
//! schedule shuffles and reports per-run accuracy curves with their mean and
//! sample standard deviation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate_set, EvalProtocol, EvalSet};
use crate::head::{SoftmaxHead, TrainConfig};
use crate::strategies::{StrategyKind, StrategyState};
use crate::stream::{FeatureDataset, FrameSample};
use crate::util::mix_seed;

/// Scenario selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Ni,
    Nc,
    Nic,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Ni, Scenario::Nc, Scenario::Nic];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Ni => "ni",
            Scenario::Nc => "nc",
            Scenario::Nic => "nic",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ni" => Ok(Scenario::Ni),
            "nc" => Ok(Scenario::Nc),
            "nic" => Ok(Scenario::Nic),
            other => Err(Error::Usage(format!(
                "unknown scenario {other:?}; expected ni, nc or nic"
            ))),
        }
    }
}

/// One training sequence: all frames of `object_class` in `session`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SequenceRef {
    pub object_class: usize,
    pub session: usize,
}

/// An ordered training batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub index: usize,
    pub sequences: Vec<SequenceRef>,
    /// Exactly the classes appearing in `sequences`.
    pub classes: BTreeSet<usize>,
}

/// A full ordered batch schedule for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    pub scenario: Scenario,
    pub batches: Vec<Batch>,
}

// Per-scenario RNG stream tags; see util::mix_seed.
const NI_STREAM: u64 = 11;
const NC_STREAM: u64 = 12;
const NIC_STREAM: u64 = 13;

/// NC and NIC need the class count to split into ten groups: one double-size
/// first batch plus groups of `num_classes / 10`.
fn group_size(num_classes: usize) -> Result<usize> {
    if num_classes < 10 || num_classes % 10 != 0 {
        return Err(Error::Protocol(format!(
            "the NC and NIC scenarios need a class count that is a positive multiple of 10, got {num_classes}"
        )));
    }
    Ok(num_classes / 10)
}

/// Training sequences grouped per class, in session order. Errors if any
/// class id has no training data.
fn sessions_per_class(
    train: &FeatureDataset,
    map: &BTreeMap<(usize, usize), Vec<usize>>,
) -> Result<Vec<Vec<usize>>> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); train.num_classes];
    for &(class, session) in map.keys() {
        per_class[class].push(session);
    }
    if let Some(class) = per_class.iter().position(|s| s.is_empty()) {
        return Err(Error::Protocol(format!(
            "class {class} has no training sequences"
        )));
    }
    Ok(per_class)
}

/// Classes grouped by category, order shuffled within and across groups.
fn shuffled_category_groups(train: &FeatureDataset, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); train.num_categories];
    for class in 0..train.num_classes {
        groups[train.class_to_category[class]].push(class);
    }
    let mut category_order: Vec<usize> = (0..train.num_categories).collect();
    category_order.shuffle(rng);
    for group in &mut groups {
        group.shuffle(rng);
    }
    (category_order, groups)
}

/// New-instances schedule: one batch per training session, in an order
/// shuffled by `seed`. Every batch must contain every class, so that the
/// only novelty between batches is new instances.
pub fn make_ni_schedule(train: &FeatureDataset, seed: u64) -> Result<BatchSchedule> {
    let map = train.sequence_map();
    if map.is_empty() {
        return Err(Error::Protocol("training set is empty".into()));
    }
    let all_classes: BTreeSet<usize> = (0..train.num_classes).collect();
    let mut sessions: Vec<usize> = train.sessions.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, NI_STREAM, 0));
    sessions.shuffle(&mut rng);

    let mut batches = Vec::with_capacity(sessions.len());
    for (index, &session) in sessions.iter().enumerate() {
        let sequences: Vec<SequenceRef> = map
            .keys()
            .filter(|&&(_, s)| s == session)
            .map(|&(object_class, session)| SequenceRef {
                object_class,
                session,
            })
            .collect();
        let classes: BTreeSet<usize> = sequences.iter().map(|r| r.object_class).collect();
        if classes != all_classes {
            return Err(Error::Protocol(format!(
                "session {session} misses classes; the NI scenario needs every class in every session"
            )));
        }
        batches.push(Batch {
            index,
            sequences,
            classes,
        });
    }
    Ok(BatchSchedule {
        scenario: Scenario::Ni,
        batches,
    })
}

/// New-classes schedule: nine batches whose class sets partition the class
/// range. The first batch holds `2 * num_classes / 10` classes, the rest
/// `num_classes / 10` each; a greedy assignment keeps every batch's classes
/// spread across categories. Each batch carries all training sessions of its
/// classes.
pub fn make_nc_schedule(train: &FeatureDataset, seed: u64) -> Result<BatchSchedule> {
    let group = group_size(train.num_classes)?;
    let map = train.sequence_map();
    let per_class = sessions_per_class(train, &map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, NC_STREAM, 0));
    let (category_order, groups) = shuffled_category_groups(train, &mut rng);

    let capacities: Vec<usize> = std::iter::once(2 * group)
        .chain(std::iter::repeat(group).take(8))
        .collect();
    let mut tie_break: Vec<usize> = (0..capacities.len()).collect();
    tie_break.shuffle(&mut rng);
    let mut rank = vec![0usize; capacities.len()];
    for (position, &batch) in tie_break.iter().enumerate() {
        rank[batch] = position;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); capacities.len()];
    let mut occupancy: Vec<Vec<usize>> = vec![vec![0; train.num_categories]; capacities.len()];
    for &cat in &category_order {
        for &class in &groups[cat] {
            // Prefer batches not yet holding this category, then the most
            // remaining capacity, then the shuffled rank.
            let target = (0..capacities.len())
                .filter(|&b| members[b].len() < capacities[b])
                .min_by_key(|&b| {
                    (
                        occupancy[b][cat],
                        members[b].len() as isize - capacities[b] as isize,
                        rank[b],
                    )
                })
                .expect("total capacity equals the class count");
            members[target].push(class);
            occupancy[target][cat] += 1;
        }
    }

    let batches = members
        .into_iter()
        .enumerate()
        .map(|(index, mut classes)| {
            classes.sort_unstable();
            let sequences: Vec<SequenceRef> = classes
                .iter()
                .flat_map(|&object_class| {
                    per_class[object_class].iter().map(move |&session| SequenceRef {
                        object_class,
                        session,
                    })
                })
                .collect();
            Batch {
                index,
                sequences,
                classes: classes.iter().copied().collect(),
            }
        })
        .collect();
    Ok(BatchSchedule {
        scenario: Scenario::Nc,
        batches,
    })
}

/// Bounded retries for the NIC partition below.
const NIC_MAX_ATTEMPTS: usize = 1000;

/// Greedy scan: repeatedly take the first `size` pairs with pairwise
/// distinct classes. Fails when a scan cannot fill a batch.
fn try_distinct_partition(
    pairs: &[(usize, usize)],
    size: usize,
) -> Option<Vec<Vec<(usize, usize)>>> {
    let mut available = pairs.to_vec();
    let mut batches = Vec::with_capacity(pairs.len() / size);
    while !available.is_empty() {
        let mut classes = BTreeSet::new();
        let mut taken = vec![false; available.len()];
        let mut batch = Vec::with_capacity(size);
        for (i, &(class, session)) in available.iter().enumerate() {
            if batch.len() == size {
                break;
            }
            if classes.insert(class) {
                batch.push((class, session));
                taken[i] = true;
            }
        }
        if batch.len() < size {
            return None;
        }
        available = available
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(&p, _)| p)
            .collect();
        batches.push(batch);
    }
    Some(batches)
}

/// New-instances-and-classes schedule over single-session batches.
///
/// The first batch picks `2 * num_classes / 10` classes spread across
/// categories and one random session for each. All remaining (class,
/// session) sequences are shuffled into batches of `num_classes / 10`
/// pairwise distinct classes; the shuffle is retried a bounded number of
/// times when the greedy split strands same-class pairs, and the whole
/// construction fails with a schedule error after [`NIC_MAX_ATTEMPTS`].
pub fn make_nic_schedule(train: &FeatureDataset, seed: u64) -> Result<BatchSchedule> {
    let group = group_size(train.num_classes)?;
    let first_size = 2 * group;
    let map = train.sequence_map();
    let per_class = sessions_per_class(train, &map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, NIC_STREAM, 0));
    let (category_order, groups) = shuffled_category_groups(train, &mut rng);

    // One class per category round-robin until the first batch is full.
    let mut picked = Vec::with_capacity(first_size);
    let mut depth = 0;
    while picked.len() < first_size {
        let mut advanced = false;
        for &cat in &category_order {
            if let Some(&class) = groups[cat].get(depth) {
                picked.push(class);
                advanced = true;
                if picked.len() == first_size {
                    break;
                }
            }
        }
        if !advanced {
            return Err(Error::Protocol(format!(
                "cannot pick {first_size} first-batch classes from {} available",
                train.num_classes
            )));
        }
        depth += 1;
    }

    let mut used = BTreeSet::new();
    let mut first_sequences = Vec::with_capacity(first_size);
    for &class in &picked {
        let &session = per_class[class]
            .choose(&mut rng)
            .expect("classes without sequences were rejected above");
        used.insert((class, session));
        first_sequences.push(SequenceRef {
            object_class: class,
            session,
        });
    }
    first_sequences.sort_unstable();

    let remaining: Vec<(usize, usize)> = map
        .keys()
        .copied()
        .filter(|pair| !used.contains(pair))
        .collect();
    if remaining.len() % group != 0 {
        return Err(Error::Protocol(format!(
            "{} sequences remain after the first batch; not divisible into batches of {group}",
            remaining.len()
        )));
    }

    let mut pairs = remaining;
    let mut partition = None;
    for _ in 0..NIC_MAX_ATTEMPTS {
        pairs.shuffle(&mut rng);
        if let Some(found) = try_distinct_partition(&pairs, group) {
            partition = Some(found);
            break;
        }
    }
    let partition = partition.ok_or_else(|| {
        Error::Schedule(format!(
            "could not split the remaining sequences into distinct-class batches after {NIC_MAX_ATTEMPTS} attempts; try another schedule seed"
        ))
    })?;

    let mut batches = Vec::with_capacity(1 + partition.len());
    batches.push(Batch {
        index: 0,
        sequences: first_sequences,
        classes: picked.iter().copied().collect(),
    });
    for (i, pairs) in partition.into_iter().enumerate() {
        let sequences: Vec<SequenceRef> = pairs
            .iter()
            .map(|&(object_class, session)| SequenceRef {
                object_class,
                session,
            })
            .collect();
        let classes: BTreeSet<usize> = sequences.iter().map(|r| r.object_class).collect();
        batches.push(Batch {
            index: i + 1,
            sequences,
            classes,
        });
    }
    Ok(BatchSchedule {
        scenario: Scenario::Nic,
        batches,
    })
}

/// Dispatches on the scenario.
pub fn make_schedule(scenario: Scenario, train: &FeatureDataset, seed: u64) -> Result<BatchSchedule> {
    match scenario {
        Scenario::Ni => make_ni_schedule(train, seed),
        Scenario::Nc => make_nc_schedule(train, seed),
        Scenario::Nic => make_nic_schedule(train, seed),
    }
}

/// Repetition settings for [`run_experiment`].
///
/// Run `r` builds its schedule from `base_seed + r`. The cumulative strategy
/// retrains from scratch on every batch, which dominates the cost of an
/// experiment; `cumulative_runs_override` caps its repetitions separately
/// when set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub num_runs: usize,
    pub base_seed: u64,
    pub cumulative_runs_override: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            num_runs: 10,
            base_seed: 0,
            cumulative_runs_override: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_runs == 0 {
            return Err(Error::Config("num_runs must be at least 1".into()));
        }
        if self.cumulative_runs_override == Some(0) {
            return Err(Error::Config(
                "cumulative_runs_override must be at least 1 when set".into(),
            ));
        }
        Ok(())
    }
}

/// Accuracy curves of one (scenario, strategy) experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub strategy: StrategyKind,
    /// `run_curves[r][b]` is the accuracy after batch `b` of run `r`.
    pub run_curves: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation per batch; 0 for a single run.
    pub std: Vec<f64>,
    /// Inference head left after the last batch of run 0.
    pub final_head: SoftmaxHead,
}

/// Training samples of a batch in canonical (class, session, frame) order.
fn gather_batch_samples(
    train: &FeatureDataset,
    map: &BTreeMap<(usize, usize), Vec<usize>>,
    batch: &Batch,
) -> Result<Vec<FrameSample>> {
    let mut refs: Vec<SequenceRef> = batch.sequences.clone();
    refs.sort_unstable();
    let mut samples = Vec::new();
    for r in refs {
        let indices = map.get(&(r.object_class, r.session)).ok_or_else(|| {
            Error::Protocol(format!(
                "schedule references sequence (class {}, session {}) which has no samples",
                r.object_class, r.session
            ))
        })?;
        samples.extend(indices.iter().map(|&i| train.samples[i].clone()));
    }
    Ok(samples)
}

fn single_run(
    train: &FeatureDataset,
    map: &BTreeMap<(usize, usize), Vec<usize>>,
    eval_set: &EvalSet,
    scenario: Scenario,
    strategy: StrategyKind,
    train_config: &TrainConfig,
    schedule_seed: u64,
    run_index: usize,
    protocol: &EvalProtocol,
) -> Result<(Vec<f64>, SoftmaxHead)> {
    let schedule = make_schedule(scenario, train, schedule_seed)?;
    let config_for = |batch_index: usize| TrainConfig {
        seed: mix_seed(train_config.seed, run_index as u64, batch_index as u64),
        ..train_config.clone()
    };
    let mut state = StrategyState::new(
        strategy,
        train.num_classes,
        train.feature_dim,
        &config_for(0),
    )?;
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut curve = Vec::with_capacity(schedule.batches.len());
    for batch in &schedule.batches {
        let samples = gather_batch_samples(train, map, batch)?;
        state.process_batch(&samples, &batch.classes, &config_for(batch.index))?;
        seen.extend(batch.classes.iter().copied());
        curve.push(evaluate_set(state.inference_head(), eval_set, protocol, &seen)?);
    }
    let head = state.inference_head().clone();
    Ok((curve, head))
}

/// Runs `(scenario, strategy)` for several schedule shuffles and aggregates
/// the accuracy curves.
///
/// Run `r` draws its schedule from `base_seed + r` and its per-batch
/// training seeds from `(train_config.seed, r, batch)`, so results are a
/// pure function of the inputs; runs execute in parallel without affecting
/// the outcome. Any non-finite accuracy aborts with a numerical error.
pub fn run_experiment(
    train: &FeatureDataset,
    test: &FeatureDataset,
    scenario: Scenario,
    strategy: StrategyKind,
    train_config: &TrainConfig,
    run_config: &RunConfig,
    protocol: &EvalProtocol,
) -> Result<ExperimentResult> {
    train_config.validate()?;
    run_config.validate()?;
    protocol.validate()?;
    if train.num_classes != test.num_classes
        || train.feature_dim != test.feature_dim
        || train.num_categories != test.num_categories
    {
        return Err(Error::Shape(
            "train and test sets disagree on classes, categories or feature dimension".into(),
        ));
    }
    let eval_set = EvalSet::new(test)?;
    let map = train.sequence_map();
    let num_runs = match (strategy, run_config.cumulative_runs_override) {
        (StrategyKind::Cumulative, Some(runs)) => runs,
        _ => run_config.num_runs,
    };

    let outcomes: Vec<(Vec<f64>, SoftmaxHead)> = (0..num_runs)
        .into_par_iter()
        .map(|run| {
            single_run(
                train,
                &map,
                &eval_set,
                scenario,
                strategy,
                train_config,
                run_config.base_seed.wrapping_add(run as u64),
                run,
                protocol,
            )
        })
        .collect::<Result<_>>()?;
    let final_head = outcomes[0].1.clone();
    let run_curves: Vec<Vec<f64>> = outcomes.into_iter().map(|(curve, _)| curve).collect();

    let batches = run_curves[0].len();
    if run_curves.iter().any(|c| c.len() != batches) {
        return Err(Error::Protocol(
            "runs produced schedules of different lengths".into(),
        ));
    }
    if run_curves.iter().flatten().any(|a| !a.is_finite()) {
        return Err(Error::Numerical(
            "an accuracy curve contains a non-finite value".into(),
        ));
    }

    let runs = run_curves.len() as f64;
    let mut mean = vec![0.0; batches];
    for curve in &run_curves {
        for (m, &a) in mean.iter_mut().zip(curve) {
            *m += a;
        }
    }
    for m in &mut mean {
        *m /= runs;
    }
    let mut std = vec![0.0; batches];
    if run_curves.len() > 1 {
        for curve in &run_curves {
            for ((s, &m), &a) in std.iter_mut().zip(&mean).zip(curve) {
                *s += (a - m) * (a - m);
            }
        }
        for s in &mut std {
            *s = (*s / (runs - 1.0)).sqrt();
        }
    }

    Ok(ExperimentResult {
        scenario,
        strategy,
        run_curves,
        mean,
        std,
        final_head,
    })
}
