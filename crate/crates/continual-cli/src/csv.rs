//! CSV emission. Headers are part of the output contract and every float
//! passes a finite check, so a NaN can never reach a file.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use continual::eval::RocPoint;
use continual::scenarios::ExperimentResult;

fn finite(value: f64, what: &str) -> Result<f64> {
    if !value.is_finite() {
        bail!("{what} is not finite");
    }
    Ok(value)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_runs(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut text = String::from("scenario,strategy,run,batch,accuracy\n");
    for (run, curve) in result.run_curves.iter().enumerate() {
        for (batch, &accuracy) in curve.iter().enumerate() {
            let accuracy = finite(accuracy, "accuracy")?;
            text.push_str(&format!(
                "{},{},{run},{batch},{accuracy}\n",
                result.scenario, result.strategy
            ));
        }
    }
    write(path, &text)
}

pub fn write_aggregate(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut text = String::from("scenario,strategy,batch,mean,std\n");
    for (batch, (&mean, &std)) in result.mean.iter().zip(&result.std).enumerate() {
        let mean = finite(mean, "mean")?;
        let std = finite(std, "std")?;
        text.push_str(&format!(
            "{},{},{batch},{mean},{std}\n",
            result.scenario, result.strategy
        ));
    }
    write(path, &text)
}

pub fn write_roc(points: &[RocPoint], path: &Path) -> Result<()> {
    let mut text = String::from("threshold,accuracy_on_accepted,rejection_rate\n");
    for p in points {
        let threshold = finite(p.threshold, "threshold")?;
        let accuracy = finite(p.accuracy_on_accepted, "accuracy_on_accepted")?;
        let rejection = finite(p.rejection_rate, "rejection_rate")?;
        text.push_str(&format!("{threshold},{accuracy},{rejection}\n"));
    }
    write(path, &text)
}

pub struct FuseRow {
    pub window: usize,
    pub reset: bool,
    pub accuracy: f64,
}

pub fn write_fuse(rows: &[FuseRow], path: &Path) -> Result<()> {
    let mut text = String::from("window,reset,accuracy\n");
    for row in rows {
        let accuracy = finite(row.accuracy, "accuracy")?;
        let reset = if row.reset { "on" } else { "off" };
        text.push_str(&format!("{},{reset},{accuracy}\n", row.window));
    }
    write(path, &text)
}
