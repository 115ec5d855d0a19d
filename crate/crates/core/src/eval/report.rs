use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvaluationSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "markdown" | "md" | "markdown-table" => Ok(Self::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// `0.7043` -> `"70.43%"`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// `Some(3.551)` -> `"3.55km"`, `None` -> `"n/a"`.
pub fn format_distance(km: Option<f64>) -> String {
    km.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}km"))
}

/// Shortest decimal form of a radius: `10.0` -> `"10"`, `0.1` -> `"0.1"`.
pub fn format_radius(km: f64) -> String {
    let s = format!("{km}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn header(radii: &[f64]) -> Vec<String> {
    let mut cols: Vec<String> = vec!["Slice".into(), "N".into(), "Failed".into()];
    cols.extend(
        radii
            .iter()
            .map(|r| format!("Accuracy@{}km", format_radius(*r))),
    );
    cols.push("Med SAE".into());
    cols.push("Mean SAE".into());
    cols
}

fn row(s: &EvaluationSummary, radii: &[f64]) -> Vec<String> {
    let mut cells = vec![
        s.label.clone(),
        s.n_total.to_string(),
        s.n_failed.to_string(),
    ];
    cells.extend(
        radii
            .iter()
            .map(|&r| s.accuracy(r).map_or_else(|| "n/a".into(), format_percent)),
    );
    cells.push(format_distance(s.median_sae_km));
    cells.push(format_distance(s.mean_sae_km));
    cells
}

/// Renders summaries as one table (one row per slice) or a JSON array.
/// Columns follow the radii of the first summary.
pub fn render_report(
    summaries: &[EvaluationSummary],
    format: ReportFormat,
) -> Result<String, EvalError> {
    let first = summaries.first().ok_or(EvalError::EmptyReport)?;
    let radii: Vec<f64> = first.accuracy_at.iter().map(|a| a.radius_km).collect();
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(summaries)
                .map_err(|e| EvalError::Io(std::io::Error::other(e)))?;
            out.push('\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| EvalError::Io(std::io::Error::other(e));
            writer.write_record(header(&radii)).map_err(io)?;
            for s in summaries {
                writer.write_record(row(s, &radii)).map_err(io)?;
            }
            let bytes = writer
                .into_inner()
                .map_err(|e| EvalError::Io(std::io::Error::other(e.to_string())))?;
            Ok(String::from_utf8(bytes).expect("csv output of UTF-8 cells"))
        }
        ReportFormat::Markdown => {
            let cols = header(&radii);
            let mut out = String::new();
            let line = |cells: &[String]| {
                let escaped: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
                format!("| {} |\n", escaped.join(" | "))
            };
            out.push_str(&line(&cols));
            let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
            for s in summaries {
                out.push_str(&line(&row(s, &radii)));
            }
            Ok(out)
        }
    }
}

pub fn write_report(
    summaries: &[EvaluationSummary],
    path: &Path,
    format: ReportFormat,
) -> Result<(), EvalError> {
    let text = render_report(summaries, format)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::RadiusAccuracy;

    fn nz_row() -> EvaluationSummary {
        EvaluationSummary {
            label: "New Zealand".into(),
            n_total: 4354,
            n_failed: 0,
            accuracy_at: vec![
                RadiusAccuracy {
                    radius_km: 10.0,
                    fraction: 0.7043,
                },
                RadiusAccuracy {
                    radius_km: 1.0,
                    fraction: 0.2536,
                },
            ],
            median_sae_km: Some(3.55),
            mean_sae_km: Some(41.95),
        }
    }

    #[test]
    fn formats() {
        assert_eq!(format_percent(0.7043), "70.43%");
        assert_eq!(format_percent(1.0 / 3.0), "33.33%");
        assert_eq!(format_distance(Some(3.5549)), "3.55km");
        assert_eq!(format_distance(None), "n/a");
        assert_eq!(format_radius(10.0), "10");
        assert_eq!(format_radius(0.1), "0.1");
    }

    #[test]
    fn markdown_row_matches_table_style() {
        let md = render_report(&[nz_row()], ReportFormat::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(
            lines[0],
            "| Slice | N | Failed | Accuracy@10km | Accuracy@1km | Med SAE | Mean SAE |"
        );
        assert_eq!(
            lines[2],
            "| New Zealand | 4354 | 0 | 70.43% | 25.36% | 3.55km | 41.95km |"
        );
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn csv_and_json() {
        let csv = render_report(&[nz_row()], ReportFormat::Csv).unwrap();
        assert_eq!(
            csv,
            "Slice,N,Failed,Accuracy@10km,Accuracy@1km,Med SAE,Mean SAE\n\
             New Zealand,4354,0,70.43%,25.36%,3.55km,41.95km\n"
        );
        let json = render_report(&[nz_row()], ReportFormat::Json).unwrap();
        let back: Vec<EvaluationSummary> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![nz_row()]);
        assert_eq!(
            json,
            render_report(&[nz_row()], ReportFormat::Json).unwrap()
        );
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(
            render_report(&[], ReportFormat::Csv),
            Err(EvalError::EmptyReport)
        ));
    }

    #[test]
    fn parses_format_names() {
        assert_eq!(
            "markdown-table".parse::<ReportFormat>().unwrap(),
            ReportFormat::Markdown
        );
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
