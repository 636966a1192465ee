//! Score tables with per-row averages in fixed-point decimal arithmetic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const DEFAULT_DECIMALS: u32 = 4;

/// `value` in units of `10^-decimals`, rounded half away from zero.
pub fn to_units(value: f64, decimals: u32) -> i64 {
    (value * 10f64.powi(decimals as i32)).round() as i64
}

pub fn from_units(units: i64, decimals: u32) -> f64 {
    units as f64 / 10f64.powi(decimals as i32)
}

/// Integer mean rounded half away from zero.
fn mean_units(values: &[i64]) -> i64 {
    let n = values.len() as i128;
    let sum: i128 = values.iter().map(|&v| v as i128).sum();
    let half_up = (2 * sum.abs() + n) / (2 * n);
    (if sum < 0 { -half_up } else { half_up }) as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub scores: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub title: String,
    pub columns: Vec<String>,
    pub decimals: u32,
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Builds a report whose scores are rounded to `decimals` places and whose
/// average column is the mean of those rounded scores, itself rounded.
pub fn build_report(
    title: &str,
    columns: &[&str],
    rows: &[(&str, Vec<f64>)],
    decimals: u32,
) -> Result<MetricReport, EvalError> {
    if columns.is_empty() {
        return Err(EvalError::InvalidInput("report needs at least one metric column".into()));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (method, scores) in rows {
        if scores.len() != columns.len() {
            return Err(EvalError::RaggedRow { method: method.to_string(), expected: columns.len(), got: scores.len() });
        }
        if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
            return Err(EvalError::InvalidInput(format!("{method} has non-finite score {bad}")));
        }
        let units: Vec<i64> = scores.iter().map(|&v| to_units(v, decimals)).collect();
        out.push(ReportRow {
            method: method.to_string(),
            scores: units.iter().map(|&u| from_units(u, decimals)).collect(),
            average: from_units(mean_units(&units), decimals),
        });
    }
    Ok(MetricReport {
        title: title.to_string(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        decimals,
        rows: out,
        metadata: BTreeMap::new(),
    })
}

impl MetricReport {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Plain-text table with right-aligned numeric columns.
    pub fn render_text(&self) -> String {
        let d = self.decimals as usize;
        let mut header: Vec<String> = vec!["Method".into()];
        header.extend(self.columns.iter().cloned());
        header.push("Average".into());
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.method.clone()];
                cells.extend(r.scores.iter().map(|s| format!("{s:.d$}")));
                cells.push(format!("{:.d$}", r.average));
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| std::iter::once(&header).chain(&body).map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let fmt_row = |cells: &[String]| {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&fmt_row(&header));
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for row in &body {
            out.push_str(&fmt_row(row));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
