//! Deterministic report documents in markdown and delimited form.
//!
//! Scores render as `0.XXXX±0.XXXX`, four decimal places, rounding
//! half-up: 0.97005 becomes 0.9701. Emitting the same report twice yields
//! byte-identical text.

use crate::eval::CvReport;
use crate::pipeline::{CellGrid, PerOriginTable, TableBundle};
use crate::stage::FeatureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Delimited,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Delimited => "csv",
        }
    }
}

/// Four decimal places with half-up rounding, decided on the correctly
/// rounded 12-digit decimal expansion so values stored as the nearest
/// double to `x.xxxx5` still round up.
pub fn format_score(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let sign = if v < 0.0 { "-" } else { "" };
    let text = format!("{:.12}", v.abs());
    let (int_part, frac) = text.split_once('.').expect("fixed-point format");
    let whole: u64 = int_part.parse().expect("integer part parses");
    let kept: u64 = frac[..4].parse().expect("four digits parse");
    let mut scaled = whole * 10_000 + kept;
    if frac.as_bytes()[4] >= b'5' {
        scaled += 1;
    }
    format!("{sign}{}.{:04}", scaled / 10_000, scaled % 10_000)
}

pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{}±{}", format_score(mean), format_score(std))
}

/// Filename-safe tag for a feature spec.
pub fn feature_slug(f: &FeatureSpec) -> String {
    f.to_string()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect()
}

/// One cross-validation run as a standalone document.
pub fn render_cv_report(report: &CvReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let mut out = String::from("# Cross-validation report\n\n");
            out.push_str(&format!("config: {}\n\n", report.config));
            out.push_str("| fold | balanced accuracy |\n|---:|---:|\n");
            for (i, s) in report.per_fold_scores.iter().enumerate() {
                out.push_str(&format!("| {} | {} |\n", i + 1, format_score(*s)));
            }
            out.push_str(&format!(
                "\n**summary:** {}\n",
                format_cell(report.mean, report.std)
            ));
            out
        }
        ReportFormat::Delimited => {
            let mut out = format!("# {}\n", report.config);
            out.push_str(&report.to_delimited());
            out
        }
    }
}

fn render_grid(grid: &CellGrid, title: &str, format: ReportFormat) -> String {
    let feature_names: Vec<String> = grid.features.iter().map(|f| f.to_string()).collect();
    match format {
        ReportFormat::Markdown => {
            let mut out = format!("# {title}\n\n");
            out.push_str(&format!("| classifier | {} |\n", feature_names.join(" | ")));
            out.push_str(&format!("|---|{}\n", "---:|".repeat(grid.features.len())));
            for (ci, classifier) in grid.classifiers.iter().enumerate() {
                let cells: Vec<String> = grid.reports[ci]
                    .iter()
                    .map(|r| format_cell(r.mean, r.std))
                    .collect();
                out.push_str(&format!("| {} | {} |\n", classifier, cells.join(" | ")));
            }
            out
        }
        ReportFormat::Delimited => {
            let mut out = format!("# {title}\n");
            out.push_str(&format!("classifier,{}\n", feature_names.join(",")));
            for (ci, classifier) in grid.classifiers.iter().enumerate() {
                let cells: Vec<String> = grid.reports[ci]
                    .iter()
                    .map(|r| format_cell(r.mean, r.std))
                    .collect();
                out.push_str(&format!("{},{}\n", classifier, cells.join(",")));
            }
            out
        }
    }
}

/// Per-origin adulteration table: one row per origin plus an `Average` row.
pub fn render_per_origin_table(table: &PerOriginTable, format: ReportFormat) -> String {
    let classifier_names: Vec<String> =
        table.classifiers.iter().map(|c| c.to_string()).collect();
    let averages = table.average();
    match format {
        ReportFormat::Markdown => {
            let mut out = format!(
                "# Adulteration detection — {} features\n\n",
                table.feature
            );
            out.push_str(&format!("| origin | {} |\n", classifier_names.join(" | ")));
            out.push_str(&format!("|---|{}\n", "---:|".repeat(table.classifiers.len())));
            for (oi, origin) in table.origins.iter().enumerate() {
                let cells: Vec<String> = table.reports[oi]
                    .iter()
                    .map(|r| format_cell(r.mean, r.std))
                    .collect();
                out.push_str(&format!("| {} | {} |\n", origin, cells.join(" | ")));
            }
            let avg_cells: Vec<String> = averages
                .iter()
                .map(|(m, s)| format_cell(*m, *s))
                .collect();
            out.push_str(&format!("| Average | {} |\n", avg_cells.join(" | ")));
            out
        }
        ReportFormat::Delimited => {
            let mut out = format!("# adulteration features={}\n", table.feature);
            out.push_str(&format!("origin,{}\n", classifier_names.join(",")));
            for (oi, origin) in table.origins.iter().enumerate() {
                let cells: Vec<String> = table.reports[oi]
                    .iter()
                    .map(|r| format_cell(r.mean, r.std))
                    .collect();
                out.push_str(&format!("{},{}\n", origin, cells.join(",")));
            }
            let avg_cells: Vec<String> = averages
                .iter()
                .map(|(m, s)| format_cell(*m, *s))
                .collect();
            out.push_str(&format!("Average,{}\n", avg_cells.join(",")));
            out
        }
    }
}

/// All documents for one evaluation run as (name, content) pairs, in a
/// fixed order.
pub fn render_bundle(bundle: &TableBundle, format: ReportFormat) -> Vec<(String, String)> {
    let mut docs = Vec::new();
    docs.push((
        "table_origin_stage".to_string(),
        render_grid(&bundle.origin_stage, "Origin identification", format),
    ));
    for table in &bundle.adulteration {
        docs.push((
            format!("table_adulteration_{}", feature_slug(&table.feature)),
            render_per_origin_table(table, format),
        ));
    }
    docs.push((
        "table_end_to_end".to_string(),
        render_grid(
            &bundle.end_to_end,
            "End-to-end adulteration detection (predicted origins)",
            format,
        ),
    ));
    docs
}
