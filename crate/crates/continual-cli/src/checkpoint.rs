//! Head checkpoints: line 1 is `C D`, then one line per class holding the D
//! weights followed by the bias. Values use shortest round-trip formatting,
//! so a write/load cycle reproduces the head bit for bit.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use continual::head::SoftmaxHead;

pub fn write_head(head: &SoftmaxHead, path: &Path) -> Result<()> {
    let classes = head.num_classes();
    let dim = head.feature_dim();
    let mut text = format!("{classes} {dim}\n");
    for class in 0..classes {
        for j in 0..dim {
            let w = head.weights[[class, j]];
            if !w.is_finite() {
                bail!("weight ({class}, {j}) is not finite");
            }
            text.push_str(&format!("{w} "));
        }
        let b = head.biases[class];
        if !b.is_finite() {
            bail!("bias {class} is not finite");
        }
        text.push_str(&format!("{b}\n"));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn load_head(path: &Path) -> Result<SoftmaxHead> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        bail!("{}: empty checkpoint", path.display());
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        bail!("{}: header must be two integers (classes dim)", path.display());
    }
    let classes: usize = fields[0]
        .parse()
        .with_context(|| format!("{}: class count", path.display()))?;
    let dim: usize = fields[1]
        .parse()
        .with_context(|| format!("{}: feature dim", path.display()))?;
    let mut head = SoftmaxHead::zeros(classes, dim)?;
    for class in 0..classes {
        let Some((index, line)) = lines.next() else {
            bail!("{}: expected {classes} rows, found {class}", path.display());
        };
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != dim + 1 {
            bail!(
                "{} line {}: expected {} values, found {}",
                path.display(),
                index + 1,
                dim + 1,
                values.len()
            );
        }
        for (j, token) in values.iter().enumerate() {
            let value: f64 = token
                .parse()
                .with_context(|| format!("{} line {}: {token:?}", path.display(), index + 1))?;
            if !value.is_finite() {
                bail!("{} line {}: non-finite value", path.display(), index + 1);
            }
            if j == dim {
                head.biases[class] = value;
            } else {
                head.weights[[class, j]] = value;
            }
        }
    }
    if let Some((index, _)) = lines.next() {
        bail!("{} line {}: trailing content", path.display(), index + 1);
    }
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use continual::head::{init_head, TrainConfig};

    #[test]
    fn round_trip_is_bit_exact() {
        let config = TrainConfig {
            init_std: 0.7,
            seed: 9,
            ..TrainConfig::default()
        };
        let head = init_head(5, 7, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("head.txt");
        write_head(&head, &path).unwrap();
        let loaded = load_head(&path).unwrap();
        assert_eq!(loaded, head);
        for class in 0..5 {
            for j in 0..7 {
                assert_eq!(
                    loaded.weights[[class, j]].to_bits(),
                    head.weights[[class, j]].to_bits()
                );
            }
            assert_eq!(loaded.biases[class].to_bits(), head.biases[class].to_bits());
        }
    }

    #[test]
    fn header_row_shape_and_value_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("head.txt");
        for (content, needle) in [
            ("", "empty"),
            ("2\n", "header"),
            ("2 2\n1 2 3 4\n5 6 7\n", "expected 3 values, found 4"),
            ("2 2\n1 2 3\n4 5 6\n7 8 9\n", "trailing"),
            ("1 1\n1 2\n3 4\n", "trailing"),
            ("1 2\nnope 2 3\n", "nope"),
            ("1 1\n1 NaN\n", "non-finite"),
        ] {
            std::fs::write(&path, content).unwrap();
            let err = format!("{:#}", load_head(&path).unwrap_err());
            assert!(err.contains(needle), "{content:?} -> {err}");
        }
    }

    #[test]
    fn missing_rows_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("head.txt");
        std::fs::write(&path, "2 2\n1 2 3\n").unwrap();
        let err = load_head(&path).unwrap_err().to_string();
        assert!(err.contains("expected"), "{err}");
    }

    #[test]
    fn non_finite_heads_are_never_written() {
        let mut head = SoftmaxHead::zeros(2, 2).unwrap();
        head.weights[[1, 0]] = f64::NAN;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("head.txt");
        assert!(write_head(&head, &path).is_err());
        assert!(!path.exists());
    }
}
