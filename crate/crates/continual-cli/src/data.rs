//! Dataset resolution shared by run, fuse and roc: synthetic generation or
//! file ingestion, then the session-based train/test split.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use continual::stream::{
    generate_synthetic_stream, load_feature_file, split_train_test, FeatureDataset,
    SyntheticStreamConfig,
};

use crate::cli::{DataArgs, ShapeArgs};
use crate::kv::{parse_list, Kv};

/// Synthetic shape from flags, config file and generator defaults.
pub fn resolve_shape(shape: &ShapeArgs, kv: &Kv) -> Result<SyntheticStreamConfig> {
    let d = SyntheticStreamConfig::default();
    Ok(SyntheticStreamConfig {
        num_classes: kv.or_default(shape.classes, "classes", d.num_classes)?,
        num_categories: kv.or_default(shape.categories, "categories", d.num_categories)?,
        num_sessions: kv.or_default(shape.sessions, "sessions", d.num_sessions)?,
        frames_per_sequence: kv.or_default(shape.frames, "frames", d.frames_per_sequence)?,
        feature_dim: kv.or_default(shape.dim, "dim", d.feature_dim)?,
        class_center_scale: kv.or_default(shape.center_scale, "center-scale", d.class_center_scale)?,
        session_offset_scale: kv.or_default(
            shape.session_scale,
            "session-scale",
            d.session_offset_scale,
        )?,
        walk_step_scale: kv.or_default(shape.walk_scale, "walk-scale", d.walk_step_scale)?,
        noise_scale: kv.or_default(shape.noise_scale, "noise-scale", d.noise_scale)?,
        seed: kv.or_default(shape.seed, "seed", d.seed)?,
    })
}

/// Loads the feature file or generates the synthetic stream.
pub fn resolve_dataset(args: &DataArgs, kv: &Kv) -> Result<FeatureDataset> {
    let data: Option<PathBuf> = kv.or_file(args.data.clone(), "data")?;
    let synthetic = kv.switch(args.synthetic, "synthetic")?;
    let shape = resolve_shape(&args.shape, kv)?;
    match (data, synthetic) {
        (Some(_), true) => bail!("choose either a data file or synthetic generation, not both"),
        (Some(path), false) => {
            load_feature_file(&path).with_context(|| format!("loading {}", path.display()))
        }
        (None, true) => generate_synthetic_stream(&shape).context("generating synthetic stream"),
        (None, false) => bail!("no data source: pass --data PATH or --synthetic"),
    }
}

/// Dataset plus its train/test split by held-out sessions.
pub fn resolve_split(args: &DataArgs, kv: &Kv) -> Result<(FeatureDataset, FeatureDataset)> {
    let dataset = resolve_dataset(args, kv)?;
    let text = kv.or_default(args.test_sessions.clone(), "test-sessions", "3,7,10".to_string())?;
    let sessions: BTreeSet<usize> = parse_list(&text, "test-sessions")?.into_iter().collect();
    let (train, test) = split_train_test(&dataset, &sessions)?;
    Ok((train, test))
}
