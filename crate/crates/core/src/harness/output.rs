//! CSV artifacts and simple SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{MetricsReport, MetricsRow};
use super::{RunOutcome, TrainingLog, TrainingLogRow};
use crate::agent::Variant;
use crate::error::Result;

pub const EXPLORATION_FILE: &str = "exploration_vs_reward.csv";
pub const UTILIZATION_FILE: &str = "utilization_timeseries.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPoint {
    pub variant: u8,
    pub episode: usize,
    pub exploration_measure: f64,
    pub cumulative_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub variant: u8,
    pub period: usize,
    pub items_performing: usize,
    pub resources_utilized: usize,
    pub unutilized: usize,
}

/// Writes records with an explicit header so empty inputs still produce one.
fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(
        path,
        &[
            "variant",
            "seed",
            "time_period_under_capacity",
            "time_period_over_capacity",
            "time_period_at_target",
            "total_items_performing",
            "total_resources_utilized",
            "efficiency_percent",
            "mean_eval_reward",
            "error",
        ],
        rows,
    )
}

pub fn write_training_log(path: &Path, log: &[TrainingLogRow]) -> Result<()> {
    write_csv(
        path,
        &[
            "episode",
            "cumulative_reward",
            "epsilon",
            "noise_magnitude",
            "vote_disagreement",
            "exploration_measure",
            "mean_loss",
            "learn_steps",
        ],
        log,
    )
}

/// Writes the exploration-vs-reward and utilization time-series CSVs.
pub fn emit_plot_data(
    logs: &[(Variant, &TrainingLog)],
    reports: &[(Variant, &MetricsReport)],
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_csv(
        &out_dir.join(EXPLORATION_FILE),
        &["variant", "episode", "exploration_measure", "cumulative_reward"],
        logs.iter().flat_map(|(v, log)| {
            log.iter().map(move |row| ExplorationPoint {
                variant: v.id(),
                episode: row.episode,
                exploration_measure: row.exploration_measure,
                cumulative_reward: row.cumulative_reward,
            })
        }),
    )?;
    write_csv(
        &out_dir.join(UTILIZATION_FILE),
        &["variant", "period", "items_performing", "resources_utilized", "unutilized"],
        reports.iter().flat_map(|(v, report)| {
            report.utilization.iter().map(move |p| UtilizationRow {
                variant: v.id(),
                period: p.period,
                items_performing: p.items_performing,
                resources_utilized: p.resources_utilized,
                unutilized: p.unutilized,
            })
        }),
    )
}

pub fn read_plot_data(in_dir: &Path) -> Result<(Vec<ExplorationPoint>, Vec<UtilizationRow>)> {
    Ok((read_csv(&in_dir.join(EXPLORATION_FILE))?, read_csv(&in_dir.join(UTILIZATION_FILE))?))
}

/// Writes `metrics.csv`, `training_log.csv`, the plot CSVs and per-head
/// checkpoints for one run.
pub fn write_run_outputs(out_dir: &Path, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let row = MetricsRow::from_report(outcome.variant.id(), outcome.seed, &outcome.report);
    write_metrics_csv(&out_dir.join("metrics.csv"), &[row])?;
    write_training_log(&out_dir.join("training_log.csv"), &outcome.log)?;
    emit_plot_data(&[(outcome.variant, &outcome.log)], &[(outcome.variant, &outcome.report)], out_dir)?;
    outcome.agent.save_checkpoints(&out_dir.join("checkpoints"))
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series], scatter: bool) -> String {
    let (w, h, pad) = (720.0, 420.0, 60.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 18.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (v, anchor, x, y) in [(x0, "start", pad, h - pad + 16.0), (x1, "end", w - pad, h - pad + 16.0)] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y0:.2}</text>"#, pad - 4.0, h - pad);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y1:.2}</text>"#, pad - 4.0, pad + 4.0);

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if scatter {
            for &(x, y) in &s.points {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}" fill-opacity="0.6"/>"#,
                    sx(x),
                    sy(y)
                );
            }
        } else if !s.points.is_empty() {
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let dash = if s.dashed { r#" stroke-dasharray="4 3""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = pad + 14.0 * i as f64;
        let _ =
            writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, w - pad - 150.0, ly - 9.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}">{}</text>"#, w - pad - 135.0, s.label);
    }
    svg.push_str("</svg>\n");
    svg
}

fn variants_in<T>(rows: &[T], key: impl Fn(&T) -> u8) -> Vec<u8> {
    let mut out: Vec<u8> = rows.iter().map(key).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Renders `exploration_vs_reward.svg` and `utilization.svg` from the plot CSVs in `in_dir`.
pub fn render_svgs(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (exploration, utilization) = read_plot_data(in_dir)?;
    fs::create_dir_all(out_dir)?;

    let series: Vec<Series> = variants_in(&exploration, |p| p.variant)
        .into_iter()
        .map(|v| Series {
            label: format!("variant {v}"),
            points: exploration
                .iter()
                .filter(|p| p.variant == v)
                .map(|p| (p.exploration_measure, p.cumulative_reward))
                .collect(),
            dashed: false,
        })
        .collect();
    let exploration_svg = out_dir.join("exploration_vs_reward.svg");
    fs::write(
        &exploration_svg,
        chart("Exploration vs reward", "exploration measure", "episode reward", &series, true),
    )?;

    let mut series = Vec::new();
    for v in variants_in(&utilization, |p| p.variant) {
        let rows: Vec<_> = utilization.iter().filter(|p| p.variant == v).collect();
        series.push(Series {
            label: format!("{v}: utilized"),
            points: rows.iter().map(|p| (p.period as f64, p.resources_utilized as f64)).collect(),
            dashed: false,
        });
        series.push(Series {
            label: format!("{v}: performing"),
            points: rows.iter().map(|p| (p.period as f64, p.items_performing as f64)).collect(),
            dashed: true,
        });
    }
    let utilization_svg = out_dir.join("utilization.svg");
    fs::write(&utilization_svg, chart("Resource utilization", "period", "resources", &series, false))?;
    Ok(vec![exploration_svg, utilization_svg])
}
