//! Data model for temporally coherent labeled feature streams.
//!
//! A stream is a set of *sequences*: for every (object class, session) pair
//! there is one run of consecutively indexed frames, each carrying a feature
//! vector of fixed dimension. Streams can be generated synthetically with
//! controllable class separation, per-session shift and temporal drift, or
//! ingested from a plain-text feature file produced by any external encoder.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, ParseError, Result};
use crate::util::mix_seed;

/// One frame of a stream: a feature vector plus labels and stream position.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub features: Vec<f64>,
    /// Object-level label, in `[0, num_classes)`.
    pub object_class: usize,
    /// Category-level label, in `[0, num_categories)`.
    pub category: usize,
    /// Acquisition session id, 1-based.
    pub session: usize,
    /// 0-based position within the (object_class, session) sequence.
    pub frame_index: usize,
}

/// A labeled collection of frames plus class and category metadata.
///
/// Invariants, enforced by [`FeatureDataset::new`]:
/// - every feature vector has length `feature_dim` and finite components;
/// - labels are in range and `category == class_to_category[object_class]`;
/// - sessions are 1-based;
/// - within one (object_class, session) pair, frame indices appear in order
///   and run consecutively from 0;
/// - `class_to_category` is total over `[0, num_classes)` and every category
///   id has at least one class.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub samples: Vec<FrameSample>,
    pub num_classes: usize,
    pub num_categories: usize,
    pub feature_dim: usize,
    pub class_to_category: Vec<usize>,
    /// Session ids present in `samples`.
    pub sessions: BTreeSet<usize>,
}

impl FeatureDataset {
    /// Validates the invariants above and derives the session set.
    pub fn new(
        samples: Vec<FrameSample>,
        num_classes: usize,
        num_categories: usize,
        feature_dim: usize,
        class_to_category: Vec<usize>,
    ) -> Result<Self> {
        if num_classes == 0 || num_categories == 0 || feature_dim == 0 {
            return Err(Error::Dataset(
                "num_classes, num_categories and feature_dim must all be at least 1".into(),
            ));
        }
        if class_to_category.len() != num_classes {
            return Err(Error::Dataset(format!(
                "class_to_category has {} entries, expected {}",
                class_to_category.len(),
                num_classes
            )));
        }
        let mut category_used = vec![false; num_categories];
        for (class, &cat) in class_to_category.iter().enumerate() {
            if cat >= num_categories {
                return Err(Error::Dataset(format!(
                    "class {class} maps to category {cat}, max is {}",
                    num_categories - 1
                )));
            }
            category_used[cat] = true;
        }
        if let Some(cat) = category_used.iter().position(|u| !u) {
            return Err(Error::Dataset(format!("category {cat} has no classes")));
        }

        let mut next_frame: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut sessions = BTreeSet::new();
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::Dataset(format!(
                    "sample {i}: feature vector has length {}, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if let Some(bad) = s.features.iter().find(|x| !x.is_finite()) {
                return Err(Error::Dataset(format!(
                    "sample {i}: non-finite feature component {bad}"
                )));
            }
            if s.object_class >= num_classes {
                return Err(Error::Dataset(format!(
                    "sample {i}: object class {} out of range",
                    s.object_class
                )));
            }
            if s.category != class_to_category[s.object_class] {
                return Err(Error::Dataset(format!(
                    "sample {i}: category {} disagrees with class map ({})",
                    s.category, class_to_category[s.object_class]
                )));
            }
            if s.session == 0 {
                return Err(Error::Dataset(format!("sample {i}: session ids are 1-based")));
            }
            let next = next_frame.entry((s.object_class, s.session)).or_insert(0);
            if s.frame_index != *next {
                return Err(Error::Dataset(format!(
                    "sample {i}: frame_index {} breaks the consecutive run of sequence (class {}, session {}), expected {next}",
                    s.frame_index, s.object_class, s.session
                )));
            }
            *next += 1;
            sessions.insert(s.session);
        }

        Ok(Self {
            samples,
            num_classes,
            num_categories,
            feature_dim,
            class_to_category,
            sessions,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample indices of every (object_class, session) sequence, in frame
    /// order, keyed by the pair. The map iterates in (class, session) order.
    pub fn sequence_map(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            map.entry((s.object_class, s.session)).or_default().push(i);
        }
        map
    }
}

/// Splits a dataset by session id: samples of `test_sessions` go to the
/// second dataset, everything else to the first. Relative sample order is
/// preserved on both sides and metadata is carried over unchanged.
///
/// Errors if `test_sessions` is not a subset of the sessions present, or if
/// either side of the split would be empty.
pub fn split_train_test(
    dataset: &FeatureDataset,
    test_sessions: &BTreeSet<usize>,
) -> Result<(FeatureDataset, FeatureDataset)> {
    if test_sessions.is_empty() {
        return Err(Error::Usage("test_sessions must not be empty".into()));
    }
    if let Some(&missing) = test_sessions.iter().find(|s| !dataset.sessions.contains(s)) {
        return Err(Error::Usage(format!(
            "test session {missing} is not present in the dataset"
        )));
    }
    if test_sessions.len() == dataset.sessions.len() {
        return Err(Error::Usage(
            "test_sessions covers every session; the training side would be empty".into(),
        ));
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in &dataset.samples {
        if test_sessions.contains(&s.session) {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    let make = |samples: Vec<FrameSample>| {
        let sessions = samples.iter().map(|s| s.session).collect();
        FeatureDataset {
            samples,
            num_classes: dataset.num_classes,
            num_categories: dataset.num_categories,
            feature_dim: dataset.feature_dim,
            class_to_category: dataset.class_to_category.clone(),
            sessions,
        }
    };
    Ok((make(train), make(test)))
}

/// Shape and difficulty knobs for the synthetic stream generator.
///
/// Each feature vector is composed as
/// `class_center + session_offset + walk + noise`, where the class center
/// and the per-session offset are fixed Gaussian draws, `walk` is a bounded
/// per-sequence random walk (one uniform step in
/// `[-walk_step_scale, walk_step_scale]` per coordinate per frame, positions
/// clamped to four step scales), and `noise` is per-frame Gaussian jitter.
/// Class centers cluster by category: each is a shared category anchor plus
/// a smaller within-category offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStreamConfig {
    pub num_classes: usize,
    pub num_categories: usize,
    pub num_sessions: usize,
    pub frames_per_sequence: usize,
    pub feature_dim: usize,
    /// Standard deviation of class centers.
    pub class_center_scale: f64,
    /// Standard deviation of per-session offsets.
    pub session_offset_scale: f64,
    /// Per-coordinate walk step bound; also sets the walk clamp.
    pub walk_step_scale: f64,
    /// Standard deviation of per-frame noise.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticStreamConfig {
    fn default() -> Self {
        Self {
            num_classes: 50,
            num_categories: 10,
            num_sessions: 11,
            frames_per_sequence: 300,
            feature_dim: 64,
            class_center_scale: 0.6,
            session_offset_scale: 0.5,
            walk_step_scale: 0.08,
            noise_scale: 0.9,
            seed: 0,
        }
    }
}

impl SyntheticStreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0
            || self.num_categories == 0
            || self.num_sessions == 0
            || self.frames_per_sequence == 0
            || self.feature_dim == 0
        {
            return Err(Error::Config(
                "all synthetic stream counts must be at least 1".into(),
            ));
        }
        if self.num_categories > self.num_classes {
            return Err(Error::Config(format!(
                "num_categories ({}) exceeds num_classes ({}); every category needs a class",
                self.num_categories, self.num_classes
            )));
        }
        let scales = [
            ("class_center_scale", self.class_center_scale),
            ("session_offset_scale", self.session_offset_scale),
            ("walk_step_scale", self.walk_step_scale),
            ("noise_scale", self.noise_scale),
        ];
        for (name, v) in scales {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.class_center_scale == 0.0 {
            return Err(Error::Config(
                "class_center_scale must be positive; classes would be indistinguishable".into(),
            ));
        }
        Ok(())
    }
}

/// The walk position is clamped to this many step scales per coordinate.
const WALK_BOUND_STEPS: f64 = 4.0;

/// Class centers sit around a shared anchor per category at this fraction of
/// `class_center_scale`. Same-category classes are therefore much closer to
/// each other than to other categories, like objects that share a shape:
/// telling them apart requires fine decision boundaries, while
/// category-level recognition stays comparatively easy.
const WITHIN_CATEGORY_RATIO: f64 = 0.35;

// Domain tags keep the generator's RNG streams independent of each other.
const CENTER_STREAM: u64 = 1;
const OFFSET_STREAM: u64 = 2;
const SEQUENCE_STREAM: u64 = 3;

/// Generates a synthetic stream with one sequence per (class, session) pair.
///
/// Classes map to categories round-robin (`class % num_categories`). Output
/// is a pure function of the config: samples are emitted class-major, then
/// by session, then by frame, and every random draw comes from seeded
/// streams derived from `config.seed`.
pub fn generate_synthetic_stream(config: &SyntheticStreamConfig) -> Result<FeatureDataset> {
    config.validate()?;
    let c = config.num_classes;
    let k = config.num_categories;
    let d = config.feature_dim;
    let unit = Normal::new(0.0, 1.0).expect("unit normal is valid");

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, CENTER_STREAM, 0));
    let mut anchors = vec![vec![0.0; d]; k];
    for anchor in &mut anchors {
        for v in anchor.iter_mut() {
            *v = unit.sample(&mut rng) * config.class_center_scale;
        }
    }
    let mut centers = vec![vec![0.0; d]; c];
    for (class, center) in centers.iter_mut().enumerate() {
        let anchor = &anchors[class % k];
        for (j, v) in center.iter_mut().enumerate() {
            *v = anchor[j]
                + unit.sample(&mut rng) * config.class_center_scale * WITHIN_CATEGORY_RATIO;
        }
    }

    let mut offsets = vec![vec![0.0; d]; config.num_sessions];
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, OFFSET_STREAM, 0));
    for offset in &mut offsets {
        for v in offset.iter_mut() {
            *v = unit.sample(&mut rng) * config.session_offset_scale;
        }
    }

    let walk_bound = WALK_BOUND_STEPS * config.walk_step_scale;
    let mut samples = Vec::with_capacity(c * config.num_sessions * config.frames_per_sequence);
    for class in 0..c {
        for session in 1..=config.num_sessions {
            let seq_seed = mix_seed(config.seed, SEQUENCE_STREAM, mix_seed(class as u64, session as u64, 0));
            let mut rng = ChaCha8Rng::seed_from_u64(seq_seed);
            let mut walk = vec![0.0; d];
            for frame_index in 0..config.frames_per_sequence {
                if frame_index > 0 {
                    for w in walk.iter_mut() {
                        let step =
                            rng.random_range(-config.walk_step_scale..=config.walk_step_scale);
                        *w = (*w + step).clamp(-walk_bound, walk_bound);
                    }
                }
                let features = (0..d)
                    .map(|j| {
                        centers[class][j]
                            + offsets[session - 1][j]
                            + walk[j]
                            + unit.sample(&mut rng) * config.noise_scale
                    })
                    .collect();
                samples.push(FrameSample {
                    features,
                    object_class: class,
                    category: class % k,
                    session,
                    frame_index,
                });
            }
        }
    }

    let class_to_category = (0..c).map(|i| i % k).collect();
    FeatureDataset::new(samples, c, k, d, class_to_category)
}

/// Writes a dataset in the plain-text feature-file format.
///
/// Line 1 is the header `num_classes num_categories feature_dim max_session`;
/// every following line is one sample:
/// `object_class category session frame_index f_1 ... f_D`, space-separated.
/// Floats use Rust's shortest round-trip formatting, so a load of the
/// written file reproduces every value exactly.
pub fn write_feature_file(dataset: &FeatureDataset, path: &Path) -> Result<()> {
    let max_session = dataset.sessions.iter().next_back().copied().unwrap_or(0);
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "{} {} {} {}",
        dataset.num_classes, dataset.num_categories, dataset.feature_dim, max_session
    )?;
    let mut line = String::new();
    for s in &dataset.samples {
        line.clear();
        line.push_str(&format!(
            "{} {} {} {}",
            s.object_class, s.category, s.session, s.frame_index
        ));
        for f in &s.features {
            line.push(' ');
            line.push_str(&format!("{f}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a dataset from the feature-file format written by
/// [`write_feature_file`].
///
/// Parse failures carry the 1-based line number. Classes that never appear
/// in a row fall back to the round-robin category mapping
/// (`class % num_categories`); blank lines are skipped.
pub fn load_feature_file(path: &Path) -> Result<FeatureDataset> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(ParseError::MalformedHeader {
                line: 1,
                detail: "file is empty".into(),
            }
            .into())
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(ParseError::MalformedHeader {
            line: 1,
            detail: format!("expected 4 fields, found {}", fields.len()),
        }
        .into());
    }
    let parse_header = |i: usize| -> Result<usize> {
        fields[i].parse().map_err(|_| {
            ParseError::MalformedHeader {
                line: 1,
                detail: format!("field {} is not a non-negative integer: {:?}", i + 1, fields[i]),
            }
            .into()
        })
    };
    let num_classes = parse_header(0)?;
    let num_categories = parse_header(1)?;
    let feature_dim = parse_header(2)?;
    let max_session = parse_header(3)?;

    let mut samples = Vec::new();
    let mut mapping: Vec<Option<usize>> = vec![None; num_classes];
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let expected = 4 + feature_dim;
        if fields.len() != expected {
            return Err(ParseError::RowArity {
                line: line_no,
                expected,
                found: fields.len(),
            }
            .into());
        }
        let parse_int = |token: &str| -> Result<usize> {
            token.parse().map_err(|_| {
                ParseError::InvalidNumber {
                    line: line_no,
                    token: token.into(),
                }
                .into()
            })
        };
        let object_class = parse_int(fields[0])?;
        let category = parse_int(fields[1])?;
        let session = parse_int(fields[2])?;
        let frame_index = parse_int(fields[3])?;
        if object_class >= num_classes {
            return Err(ParseError::ValueOutOfRange {
                line: line_no,
                field: "object class",
                value: object_class,
                bound: format!("max {}", num_classes.saturating_sub(1)),
            }
            .into());
        }
        if category >= num_categories {
            return Err(ParseError::ValueOutOfRange {
                line: line_no,
                field: "category",
                value: category,
                bound: format!("max {}", num_categories.saturating_sub(1)),
            }
            .into());
        }
        if session == 0 || session > max_session {
            return Err(ParseError::ValueOutOfRange {
                line: line_no,
                field: "session",
                value: session,
                bound: format!("1 to {max_session}"),
            }
            .into());
        }
        match mapping[object_class] {
            None => mapping[object_class] = Some(category),
            Some(expected) if expected != category => {
                return Err(ParseError::InconsistentCategory {
                    line: line_no,
                    class: object_class,
                    expected,
                    found: category,
                }
                .into());
            }
            Some(_) => {}
        }
        let mut features = Vec::with_capacity(feature_dim);
        for token in &fields[4..] {
            let v: f64 = token.parse().map_err(|_| ParseError::InvalidNumber {
                line: line_no,
                token: (*token).into(),
            })?;
            if !v.is_finite() {
                return Err(ParseError::InvalidNumber {
                    line: line_no,
                    token: (*token).into(),
                }
                .into());
            }
            features.push(v);
        }
        samples.push(FrameSample {
            features,
            object_class,
            category,
            session,
            frame_index,
        });
    }

    let class_to_category = mapping
        .into_iter()
        .enumerate()
        .map(|(class, cat)| cat.unwrap_or(class % num_categories.max(1)))
        .collect();
    FeatureDataset::new(samples, num_classes, num_categories, feature_dim, class_to_category)
}
