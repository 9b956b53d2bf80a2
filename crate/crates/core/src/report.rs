//! Table rendering for reports, as aligned Markdown for reading or CSV
//! for machines.

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterModel, SeparationTest};
use crate::impact::{CohortStats, ImpactSummary, MetricSummary, UnderRadarReport};
use crate::search::{GridRow, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Markdown,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

/// A titled table with optional footer, renderable in either format.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footer: Option<String>,
}

impl Table {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Markdown => self.render_markdown(),
            OutputFormat::Csv => self.render_csv(),
        }
    }

    fn render_markdown(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i < widths.len() {
                    widths[i] = widths[i].max(cell.len());
                }
            }
        }
        let mut out = String::new();
        out.push_str(&format!("## {}\n\n", self.title));
        let fmt_row = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{:width$}", c, width = widths.get(i).copied().unwrap_or(0)))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        out.push_str(&fmt_row(&self.headers));
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&format!("| {} |\n", rule.join(" | ")));
        for row in &self.rows {
            out.push_str(&fmt_row(row));
        }
        if let Some(footer) = &self.footer {
            out.push_str(&format!("\n{footer}\n"));
        }
        out.push('\n');
        out
    }

    fn render_csv(&self) -> String {
        let escape = |cell: &str| {
            if cell.contains([',', '"', '\n']) {
                format!("\"{}\"", cell.replace('"', "\"\""))
            } else {
                cell.to_string()
            }
        };
        let mut out = String::new();
        out.push_str(&format!("# {}\n", self.title));
        out.push_str(&self.headers.iter().map(|h| escape(h)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        if let Some(footer) = &self.footer {
            out.push_str(&format!("# {footer}\n"));
        }
        out
    }
}

/// Reproducibility header: the full effective configuration, echoed at
/// the top of every report.
pub fn config_header(tool_version: &str, entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# version: {tool_version}\n"));
    for (key, value) in entries {
        out.push_str(&format!("# {key}: {value}\n"));
    }
    out.push('\n');
    out
}

pub fn fmt1(x: f64) -> String {
    format!("{x:.1}")
}

pub fn fmt_pct(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(fmt1).unwrap_or_else(|| "-".into())
}

fn metric_row(name: &str, summary: &Option<MetricSummary>, percent: bool) -> Vec<String> {
    let fmt = |v: f64| {
        if percent {
            fmt_pct(v)
        } else {
            fmt1(v)
        }
    };
    match summary {
        Some(s) => vec![name.into(), fmt(s.mean), fmt(s.median), fmt(s.p90)],
        None => vec![name.into(), "-".into(), "-".into(), "-".into()],
    }
}

/// Four metric rows (stays, episodes, tenure, usage) with a coverage
/// footer.
pub fn cohort_table(title: &str, stats: &CohortStats) -> Table {
    Table {
        title: title.to_string(),
        headers: vec!["".into(), "Mean".into(), "Median".into(), "90th Percentile".into()],
        rows: vec![
            metric_row("Total Stays", &stats.total_stays, false),
            metric_row("Total Episodes", &stats.total_episodes, false),
            metric_row("Tenure (days)", &stats.tenure_days, false),
            metric_row("Usage Percentage", &stats.usage_percentage, true),
        ],
        footer: Some(format!(
            "Coverage: {}/{} ({})",
            stats.coverage_count,
            stats.population,
            fmt_pct(stats.coverage_fraction)
        )),
    }
}

pub fn grid_table(title: &str, rows: &[GridRow], objective: Objective) -> Table {
    let objective_header = match objective {
        Objective::AvgStaysSaved => "Avg. Stays Saved per Referral",
        Objective::AvgTenureReduction => "Avg. Tenure Reduction per Referral (days)",
    };
    Table {
        title: title.to_string(),
        headers: vec![
            "Window (days)/Threshold".into(),
            "N".into(),
            objective_header.into(),
            "Median ID Time (days)".into(),
        ],
        rows: rows
            .iter()
            .map(|row| {
                vec![
                    format!("{}/{}", row.window_days, row.threshold),
                    format!("{} ({})", row.identified, fmt_pct(row.identified_fraction)),
                    fmt_opt(row.objective_value),
                    fmt_opt(row.median_time_to_id_days),
                ]
            })
            .collect(),
        footer: None,
    }
}

pub fn compare_table(title: &str, rows: &[(String, ImpactSummary)]) -> Table {
    Table {
        title: title.to_string(),
        headers: vec![
            "Definition".into(),
            "Clients Identified".into(),
            "Stays Saved per Referral".into(),
            "Tenure Reduction per Referral (days)".into(),
            "Mean Time to ID (days)".into(),
            "Median Time to ID (days)".into(),
        ],
        rows: rows
            .iter()
            .map(|(name, s)| {
                vec![
                    name.clone(),
                    format!("{} ({})", s.identified, fmt_pct(s.identified_fraction)),
                    fmt_opt(s.mean_stays_saved),
                    fmt_opt(s.mean_tenure_reduction_days),
                    fmt_opt(s.mean_time_to_id_days),
                    fmt_opt(s.median_time_to_id_days),
                ]
            })
            .collect(),
        footer: None,
    }
}

pub fn cluster_table(model: &ClusterModel) -> Table {
    Table {
        title: "Cluster groups".into(),
        headers: vec![
            "Group".into(),
            "Average Total Episodes".into(),
            "Average Total Stays".into(),
            "Proportion of Population".into(),
        ],
        rows: model
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let name = c
                    .label
                    .map(|l| l.to_string())
                    .unwrap_or_else(|| format!("cluster {i}"));
                vec![
                    name,
                    fmt1(c.mean_total_episodes),
                    fmt1(c.mean_total_stays),
                    format!("{} ({})", fmt_pct(c.population_fraction), c.size),
                ]
            })
            .collect(),
        footer: None,
    }
}

/// Pairwise separation p-values between clusters.
pub fn separation_table(tests: &[(String, String, SeparationTest)]) -> Table {
    Table {
        title: "Pairwise centroid separation (Hotelling's T²)".into(),
        headers: vec![
            "Pair".into(),
            "T²".into(),
            "F".into(),
            "p-value".into(),
        ],
        rows: tests
            .iter()
            .map(|(a, b, t)| {
                vec![
                    format!("{a} vs {b}"),
                    format!("{:.3}", t.t2),
                    format!("{:.3}", t.f_statistic),
                    format!("{:.3e}", t.p_value),
                ]
            })
            .collect(),
        footer: None,
    }
}

pub fn under_radar_tables(report: &UnderRadarReport) -> Vec<Table> {
    let mut tables = vec![cohort_table("Clients not identified", &report.unflagged)];
    tables.push(Table {
        title: "Long-tenure unflagged cohort".into(),
        headers: vec!["Metric".into(), "Value".into()],
        rows: vec![
            vec![
                "90th percentile tenure (days)".into(),
                fmt_opt(report.p90_tenure_days),
            ],
            vec!["Cohort size".into(), report.long_tenure_count.to_string()],
            vec![
                "Fraction of population".into(),
                fmt_pct(report.long_tenure_fraction),
            ],
            vec![
                "Mean inter-episode gap (days)".into(),
                fmt_opt(report.long_tenure_mean_inter_episode_gap),
            ],
        ],
        footer: None,
    });
    tables
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> Table {
        Table {
            title: "Sample".into(),
            headers: vec!["A".into(), "B".into()],
            rows: vec![vec!["1".into(), "two".into()]],
            footer: Some("Coverage: 1/2 (50.0%)".into()),
        }
    }

    #[test]
    fn markdown_render_is_aligned() {
        let text = sample_table().render(OutputFormat::Markdown);
        assert!(text.contains("## Sample"));
        assert!(text.contains("| 1 | two |"));
        assert!(text.contains("Coverage: 1/2 (50.0%)"));
    }

    #[test]
    fn csv_render_escapes_commas() {
        let mut table = sample_table();
        table.rows[0][1] = "a,b".into();
        let text = table.render(OutputFormat::Csv);
        assert!(text.contains("1,\"a,b\""));
    }

    #[test]
    fn config_header_echoes_entries() {
        let header = config_header("0.1.0", &[("gap-days", "30".into())]);
        assert!(header.contains("# version: 0.1.0"));
        assert!(header.contains("# gap-days: 30"));
    }
}
