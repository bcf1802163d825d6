//! One function per subcommand: resolve flags against the config file,
//! call into the library, write outputs.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use continual::eval::{
    roc_sweep, temporal_fuse, EvalProtocol, FusionConfig, Level, ProtocolKind,
};
use continual::head::{forward, SoftmaxHead, TrainConfig};
use continual::scenarios::{run_experiment, RunConfig, Scenario};
use continual::strategies::StrategyKind;
use continual::stream::{generate_synthetic_stream, write_feature_file, FeatureDataset};

use crate::checkpoint;
use crate::cli::{FuseArgs, GenerateArgs, ReportArgs, RocArgs, RunArgs};
use crate::csv::{self, FuseRow};
use crate::data::{resolve_shape, resolve_split};
use crate::kv::{parse_list, Kv};
use crate::report;

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing {key}: pass --{key} or set {key} in the config file"))
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let shape = resolve_shape(&args.shape, &kv)?;
    let out: PathBuf = required(kv.or_file(args.out.clone(), "out")?, "out")?;
    kv.reject_unused()?;
    let dataset = generate_synthetic_stream(&shape)?;
    write_feature_file(&dataset, &out)?;
    emitln(&format!(
        "wrote {}: {} classes, {} categories, {} sessions, {} samples",
        out.display(),
        dataset.num_classes,
        dataset.num_categories,
        dataset.sessions.len(),
        dataset.len()
    ))?;
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let scenario: Scenario = required(kv.or_file(args.scenario.clone(), "scenario")?, "scenario")?
        .parse()
        .map_err(|e| anyhow!("scenario: {e}"))?;
    let strategy: StrategyKind =
        required(kv.or_file(args.strategy.clone(), "strategy")?, "strategy")?
            .parse()
            .map_err(|e| anyhow!("strategy: {e}"))?;
    let threshold = kv.or_default(args.threshold, "threshold", 0.5)?;
    let kind = match kv
        .or_default(args.protocol.clone(), "protocol", "full".to_string())?
        .as_str()
    {
        "full" => ProtocolKind::FullTestSet,
        "partial" => ProtocolKind::PartialTestSet,
        "reject" => ProtocolKind::RejectionFullTestSet { threshold },
        other => bail!("protocol: expected full, partial or reject, got {other:?}"),
    };
    let level: Level = kv
        .or_default(args.level.clone(), "level", "object".to_string())?
        .parse()
        .map_err(|e| anyhow!("level: {e}"))?;
    let protocol = EvalProtocol { kind, level };

    let d = TrainConfig::default();
    let train_config = TrainConfig {
        learning_rate: kv.or_default(args.learning_rate, "learning-rate", d.learning_rate)?,
        epochs: kv.or_default(args.epochs, "epochs", d.epochs)?,
        minibatch_size: kv.or_default(args.minibatch, "minibatch", d.minibatch_size)?,
        init_mean: kv.or_default(args.init_mean, "init-mean", d.init_mean)?,
        init_std: kv.or_default(args.init_std, "init-std", d.init_std)?,
        early_stop_patience: kv.or_default(args.patience, "patience", d.early_stop_patience)?,
        holdout_fraction: kv.or_default(args.holdout, "holdout", d.holdout_fraction)?,
        seed: kv.or_default(args.train_seed, "train-seed", 0)?,
    };
    let run_config = RunConfig {
        num_runs: kv.or_default(args.runs, "runs", 10)?,
        base_seed: kv.or_default(args.schedule_seed, "schedule-seed", 0)?,
        cumulative_runs_override: kv.or_file(args.cumulative_runs, "cumulative-runs")?,
    };
    let (train, test) = resolve_split(&args.data, &kv)?;
    let out: PathBuf = required(kv.or_file(args.out.clone(), "out")?, "out")?;
    kv.reject_unused()?;

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let result = run_experiment(
        &train,
        &test,
        scenario,
        strategy,
        &train_config,
        &run_config,
        &protocol,
    )?;
    csv::write_runs(&result, &out.join("runs.csv"))?;
    csv::write_aggregate(&result, &out.join("aggregate.csv"))?;
    checkpoint::write_head(&result.final_head, &out.join("head.txt"))?;
    let last = result.mean.len() - 1;
    emitln(&format!(
        "{scenario} {strategy}: final accuracy {:.4} ± {:.4} ({} runs, {} batches)",
        result.mean[last],
        result.std[last],
        result.run_curves.len(),
        result.mean.len()
    ))?;
    emitln(&format!(
        "wrote runs.csv, aggregate.csv, head.txt in {}",
        out.display()
    ))?;
    Ok(())
}

/// Per-frame confidences of the test set in (class, session) sequence
/// order, with labels and sequence start offsets.
fn sequence_confidences(
    head: &SoftmaxHead,
    test: &FeatureDataset,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, Vec<usize>)> {
    if test.num_classes != head.num_classes() || test.feature_dim != head.feature_dim() {
        bail!(
            "checkpoint shape ({} classes, dim {}) does not match the data ({} classes, dim {})",
            head.num_classes(),
            head.feature_dim(),
            test.num_classes,
            test.feature_dim
        );
    }
    let mut confidences = Vec::with_capacity(test.len());
    let mut labels = Vec::with_capacity(test.len());
    let mut starts = Vec::new();
    for indices in test.sequence_map().values() {
        starts.push(confidences.len());
        for &i in indices {
            let sample = &test.samples[i];
            confidences.push(forward(head, &sample.features)?);
            labels.push(sample.object_class);
        }
    }
    Ok((confidences, labels, starts))
}

pub fn fuse(args: &FuseArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let head_path: PathBuf = required(kv.or_file(args.head.clone(), "head")?, "head")?;
    let head = checkpoint::load_head(&head_path)?;
    let (_, test) = resolve_split(&args.data, &kv)?;
    let windows_text: String = required(kv.or_file(args.windows.clone(), "windows")?, "windows")?;
    let windows: Vec<usize> = parse_list(&windows_text, "windows")?;
    let resets = match kv
        .or_default(args.reset.clone(), "reset", "both".to_string())?
        .as_str()
    {
        "on" => vec![true],
        "off" => vec![false],
        "both" => vec![false, true],
        other => bail!("reset: expected on, off or both, got {other:?}"),
    };
    let out: PathBuf = required(kv.or_file(args.out.clone(), "out")?, "out")?;
    kv.reject_unused()?;

    let (confidences, labels, starts) = sequence_confidences(&head, &test)?;
    let mut rows = Vec::new();
    for &window in &windows {
        for &reset in &resets {
            let config = FusionConfig {
                window,
                reset_at_sequence_start: reset,
            };
            let accuracy = temporal_fuse(&confidences, &labels, &starts, &config)?;
            rows.push(FuseRow {
                window,
                reset,
                accuracy,
            });
        }
    }
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("fuse.csv");
    csv::write_fuse(&rows, &path)?;
    emitln(&format!("wrote {} ({} rows)", path.display(), rows.len()))?;
    Ok(())
}

pub fn roc(args: &RocArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let head_path: PathBuf = required(kv.or_file(args.head.clone(), "head")?, "head")?;
    let head = checkpoint::load_head(&head_path)?;
    let (_, test) = resolve_split(&args.data, &kv)?;
    let seen: BTreeSet<usize> = match kv.or_file(args.seen.clone(), "seen")? {
        Some(text) => parse_list(&text, "seen")?.into_iter().collect(),
        None => (0..test.num_classes).collect(),
    };
    let thresholds: Vec<f64> = match kv.or_file(args.thresholds.clone(), "thresholds")? {
        Some(text) => parse_list(&text, "thresholds")?,
        None => (0..=10).map(|i| f64::from(i) / 10.0).collect(),
    };
    let out: PathBuf = required(kv.or_file(args.out.clone(), "out")?, "out")?;
    kv.reject_unused()?;

    let points = roc_sweep(&head, &test, &seen, &thresholds)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("roc.csv");
    csv::write_roc(&points, &path)?;
    emitln(&format!("wrote {} ({} rows)", path.display(), points.len()))?;
    Ok(())
}

/// Writes to stdout, treating a closed pipe (e.g. `| head`) as success.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(err) if err.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other.context("writing to stdout"),
    }
}

/// [`emit`] plus a trailing newline, for one-line status messages.
fn emitln(text: &str) -> Result<()> {
    emit(text)?;
    emit("\n")
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.input {
        rows.extend(report::read_aggregate(path)?);
    }
    emit(&report::render_table(&rows))?;
    if let Some(svg_path) = &args.svg {
        let svg = report::render_svg(&rows)?;
        fs::write(svg_path, svg).with_context(|| format!("writing {}", svg_path.display()))?;
        emitln(&format!("wrote {}", svg_path.display()))?;
    }
    Ok(())
}
