//! Aggregation of per-seed metrics CSVs into mean ± 95% confidence-interval
//! curves, plus a self-contained SVG renderer (no plotting library; the
//! output embeds the numeric series so plots stay auditable).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use contact_rl::trainer::ExperimentConfig;

/// One run's eval-success series, labeled by its (task, difficulty, arm).
#[derive(Debug, Clone)]
pub struct RunSeries {
    pub label: String,
    pub path: PathBuf,
    /// (epoch, eval_success) rows in file order.
    pub rows: Vec<(usize, f64)>,
}

/// Aggregated statistics of one (label, epoch) cell across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedPoint {
    pub label: String,
    pub epoch: usize,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single seed).
    pub sd: f64,
    /// 1.96 * sd / sqrt(n), the normal-approximation 95% half-width.
    pub ci_half: f64,
}

/// Parse a metrics CSV produced by the trainer, keeping epoch and
/// eval_success.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty metrics csv")?;
    let columns: Vec<&str> = header.split(',').collect();
    let epoch_idx = columns
        .iter()
        .position(|c| *c == "epoch")
        .context("metrics csv has no 'epoch' column")?;
    let eval_idx = columns
        .iter()
        .position(|c| *c == "eval_success")
        .context("metrics csv has no 'eval_success' column")?;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let epoch: usize = fields
            .get(epoch_idx)
            .and_then(|f| f.parse().ok())
            .with_context(|| format!("{}: bad epoch on line {}", path.display(), lineno + 2))?;
        let eval: f64 = fields
            .get(eval_idx)
            .and_then(|f| f.parse().ok())
            .with_context(|| {
                format!("{}: bad eval_success on line {}", path.display(), lineno + 2)
            })?;
        rows.push((epoch, eval));
    }
    Ok(rows)
}

/// Derive the curve label for a run directory: the config snapshot's
/// task-difficulty-arm when present, otherwise the directory name with any
/// `-seed<k>` suffix removed.
pub fn run_label(metrics_path: &Path) -> String {
    let dir = metrics_path.parent().unwrap_or(Path::new("."));
    let snapshot = dir.join("config.json");
    if let Ok(text) = std::fs::read_to_string(&snapshot) {
        if let Ok(config) = serde_json::from_str::<ExperimentConfig>(&text) {
            return format!(
                "{}-{}-{}",
                config.task.name(),
                config.difficulty.name(),
                config.arm.name()
            );
        }
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    match name.rfind("-seed") {
        Some(idx) => name[..idx].to_string(),
        None => name,
    }
}

/// Expand the glob and load every matching metrics CSV.
pub fn collect_runs(pattern: &str) -> Result<Vec<RunSeries>> {
    let mut runs = Vec::new();
    for entry in glob::glob(pattern).with_context(|| format!("bad glob '{pattern}'"))? {
        let path = entry?;
        if !path.is_file() {
            continue;
        }
        let rows = read_metrics_csv(&path)?;
        runs.push(RunSeries {
            label: run_label(&path),
            path,
        rows,
        });
    }
    if runs.is_empty() {
        bail!("no metrics files match '{pattern}'");
    }
    runs.sort_by(|a, b| (&a.label, &a.path).cmp(&(&b.label, &b.path)));
    Ok(runs)
}

/// Mean and 95% band per (label, epoch). Seeds may have different lengths
/// (early-stopped runs); each epoch aggregates the seeds that reached it.
pub fn aggregate(runs: &[RunSeries]) -> Vec<AggregatedPoint> {
    let mut cells: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for run in runs {
        for &(epoch, eval) in &run.rows {
            cells
                .entry((run.label.clone(), epoch))
                .or_default()
                .push(eval);
        }
    }
    cells
        .into_iter()
        .map(|((label, epoch), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                (ss / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let ci_half = 1.96 * sd / (n as f64).sqrt();
            AggregatedPoint {
                label,
                epoch,
                n,
                mean,
                sd,
                ci_half,
            }
        })
        .collect()
}

pub const AGGREGATE_HEADER: &str = "label,epoch,n,mean_eval_success,sd,ci_half";

/// Render the aggregated CSV text (sorted by label then epoch).
pub fn aggregate_csv(points: &[AggregatedPoint]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.label, p.epoch, p.n, p.mean, p.sd, p.ci_half
        );
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

const PALETTE: [&str; 8] = [
    "#d62728", "#1f77b4", "#ff7f0e", "#8c564b", "#17becf", "#9467bd", "#2ca02c", "#7f7f7f",
];

/// Render an SVG line chart with one mean curve and confidence band per
/// label. The aggregated CSV is embedded in a `<desc>` element so the chart
/// carries its own numbers.
pub fn render_svg(points: &[AggregatedPoint], title: &str) -> String {
    let width = 880.0;
    let height = 540.0;
    let (ml, mr, mt, mb) = (70.0, 230.0, 42.0, 58.0);
    let pw = width - ml - mr;
    let ph = height - mt - mb;

    let max_epoch = points.iter().map(|p| p.epoch).max().unwrap_or(1).max(1);
    let x = |epoch: usize| ml + pw * epoch as f64 / max_epoch as f64;
    let y = |v: f64| mt + ph * (1.0 - v.clamp(0.0, 1.0));

    let mut labels: Vec<String> = points.iter().map(|p| p.label.clone()).collect();
    labels.sort();
    labels.dedup();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, "<desc>{}</desc>", xml_escape(&aggregate_csv(points)));
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        xml_escape(title)
    );

    // Axes and gridlines.
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let yy = y(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{ml}" y1="{yy}" x2="{:.1}" y2="{yy}" stroke="#dddddd" stroke-width="1"/>"#,
            ml + pw
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="end">{v:.2}</text>"#,
            ml - 8.0,
            yy + 4.0
        );
    }
    let x_ticks = max_epoch.min(10).max(1);
    for i in 0..=x_ticks {
        let epoch = i * max_epoch / x_ticks;
        let xx = x(epoch);
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{epoch}</text>"#,
            mt + ph + 20.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{:.1}" stroke="black" stroke-width="1"/>"#,
        mt + ph
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{ml}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="1"/>"#,
        mt + ph,
        ml + pw,
        mt + ph
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">epoch</text>"#,
        ml + pw / 2.0,
        height - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">eval success</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    );

    for (idx, label) in labels.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut series: Vec<&AggregatedPoint> =
            points.iter().filter(|p| &p.label == label).collect();
        series.sort_by_key(|p| p.epoch);

        // Confidence band: upper edge forward, lower edge back.
        if series.len() > 1 {
            let mut band = String::new();
            for p in &series {
                let _ = write!(band, "{:.2},{:.2} ", x(p.epoch), y(p.mean + p.ci_half));
            }
            for p in series.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", x(p.epoch), y(p.mean - p.ci_half));
            }
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" opacity="0.15"/>"#,
                band.trim_end()
            );
        }

        let mut line = String::new();
        for p in &series {
            let _ = write!(line, "{:.2},{:.2} ", x(p.epoch), y(p.mean));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.trim_end()
        );

        // Legend entry.
        let ly = mt + 12.0 + idx as f64 * 20.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#,
            ml + pw + 16.0,
            ml + pw + 40.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            ml + pw + 46.0,
            ly + 4.0,
            xml_escape(label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}
