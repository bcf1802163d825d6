//! Rendering of aggregate CSVs: fixed-width text tables and a
//! self-contained SVG plot of the mean accuracy curves.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug)]
pub struct AggregateRow {
    pub scenario: String,
    pub strategy: String,
    pub batch: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "scenario,strategy,batch,mean,std")) => {}
        Some((_, other)) => bail!(
            "{}: unexpected header {other:?}; this is not an aggregate CSV",
            path.display()
        ),
        None => bail!("{}: empty file", path.display()),
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!("{} line {}: expected 5 fields", path.display(), index + 1);
        }
        let context = |what| format!("{} line {}: {what}", path.display(), index + 1);
        rows.push(AggregateRow {
            scenario: fields[0].to_string(),
            strategy: fields[1].to_string(),
            batch: fields[2].parse().with_context(|| context("batch"))?,
            mean: fields[3].parse().with_context(|| context("mean"))?,
            std: fields[4].parse().with_context(|| context("std"))?,
        });
    }
    Ok(rows)
}

/// Rows regrouped per (scenario, strategy) curve, first appearance order.
fn curves(rows: &[AggregateRow]) -> Vec<((String, String), Vec<&AggregateRow>)> {
    let mut out: Vec<((String, String), Vec<&AggregateRow>)> = Vec::new();
    for row in rows {
        let key = (row.scenario.clone(), row.strategy.clone());
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(row),
            None => out.push((key, vec![row])),
        }
    }
    out
}

pub fn render_table(rows: &[AggregateRow]) -> String {
    let mut text = String::new();
    for ((scenario, strategy), rows) in curves(rows) {
        text.push_str(&format!("{scenario} {strategy} ({} batches)\n", rows.len()));
        text.push_str("  batch    mean     std\n");
        for row in rows {
            text.push_str(&format!(
                "  {:>5}  {:>6.4}  {:>6.4}\n",
                row.batch, row.mean, row.std
            ));
        }
        text.push('\n');
    }
    text
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 45.0;

pub fn render_svg(rows: &[AggregateRow]) -> Result<String> {
    let curves = curves(rows);
    if curves.is_empty() {
        bail!("no rows to plot");
    }
    let max_batch = curves
        .iter()
        .flat_map(|(_, rows)| rows.iter().map(|r| r.batch))
        .max()
        .unwrap();
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |batch: usize| {
        if max_batch == 0 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * batch as f64 / max_batch as f64
        }
    };
    let y = |accuracy: f64| TOP + plot_h * (1.0 - accuracy);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    for tick in 0..=4 {
        let accuracy = tick as f64 / 4.0;
        let ty = y(accuracy);
        svg.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{ty:.1}\" x2=\"{:.1}\" y2=\"{ty:.1}\" \
             stroke=\"#dddddd\"/>\n",
            LEFT + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{accuracy:.2}</text>\n",
            LEFT - 8.0,
            ty + 4.0
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        TOP + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    ));
    for batch in [0, max_batch] {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{batch}</text>\n",
            x(batch),
            TOP + plot_h + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">training batch</text>\n",
        LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    ));

    for (i, ((scenario, strategy), rows)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", x(r.batch), y(r.mean)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
        let ly = TOP + 16.0 * i as f64 + 10.0;
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            LEFT + plot_w + 16.0,
            ly - 10.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\">{scenario} {strategy}</text>\n",
            LEFT + plot_w + 34.0
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<AggregateRow> {
        vec![
            AggregateRow {
                scenario: "nc".into(),
                strategy: "cwr".into(),
                batch: 0,
                mean: 0.2,
                std: 0.01,
            },
            AggregateRow {
                scenario: "nc".into(),
                strategy: "cwr".into(),
                batch: 1,
                mean: 0.4,
                std: 0.02,
            },
            AggregateRow {
                scenario: "nc".into(),
                strategy: "naive".into(),
                batch: 0,
                mean: 0.2,
                std: 0.0,
            },
        ]
    }

    #[test]
    fn aggregate_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aggregate.csv");
        std::fs::write(
            &path,
            "scenario,strategy,batch,mean,std\nnc,cwr,0,0.5,0.1\nnc,cwr,1,0.75,0.2\n",
        )
        .unwrap();
        let rows = read_aggregate(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].batch, 1);
        assert_eq!(rows[1].mean, 0.75);
        assert_eq!(rows[0].scenario, "nc");
    }

    #[test]
    fn wrong_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.csv");
        std::fs::write(&path, "threshold,accuracy_on_accepted,rejection_rate\n").unwrap();
        let err = read_aggregate(&path).unwrap_err().to_string();
        assert!(err.contains("not an aggregate"), "{err}");
    }

    #[test]
    fn tables_group_by_curve() {
        let table = render_table(&rows());
        assert!(table.contains("nc cwr (2 batches)"));
        assert!(table.contains("nc naive (1 batches)"));
        assert!(table.contains("0.4000"));
    }

    #[test]
    fn svg_has_one_polyline_per_curve() {
        let svg = render_svg(&rows()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("nc cwr"));
        assert!(render_svg(&[]).is_err());
    }
}
