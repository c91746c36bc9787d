//! Table and CSV emission for experiment results, plus rendering of the
//! bundled reference tables of reported values.

use std::collections::BTreeMap;

use crate::ir_eval::MeasureReport;

/// Formats a metric value in the compact dot style used by result tables:
/// `0.48 -> ".480"`, `1.0 -> "1.000"`.
pub fn format_metric(v: f64) -> String {
    let s = format!("{v:.3}");
    s.strip_prefix('0').map(str::to_string).unwrap_or(s)
}

/// Left-aligns the first column and right-aligns the rest.
fn align(rows: &[Vec<String>]) -> String {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let pad = widths[i] - cell.chars().count();
            if i == 0 {
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            } else {
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Marks attached to table cells: the baseline row carries `—` (no
/// self-comparison), other rows carry `†` where the Holm-corrected paired
/// t-test is significant.
pub fn render_comparison_table(
    variant_order: &[String],
    baseline: &str,
    reports: &BTreeMap<String, MeasureReport>,
    labels: &[String],
    significant: &BTreeMap<(String, String), bool>,
) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["variant".to_string()];
    header.extend(labels.iter().cloned());
    rows.push(header);
    for name in variant_order {
        let report = &reports[name];
        let mut row = vec![name.clone()];
        for label in labels {
            let value = report.aggregates.get(label).copied().unwrap_or(0.0);
            let mark = if name == baseline {
                "—"
            } else if significant
                .get(&(name.clone(), label.clone()))
                .copied()
                .unwrap_or(false)
            {
                "†"
            } else {
                ""
            };
            row.push(format!("{}{mark}", format_metric(value)));
        }
        rows.push(row);
    }
    align(&rows)
}

/// CSV of aggregates and significance, one row per (variant, measure).
pub fn render_report_csv(
    variant_order: &[String],
    baseline: &str,
    reports: &BTreeMap<String, MeasureReport>,
    labels: &[String],
    p_values: &BTreeMap<(String, String), f64>,
    significant: &BTreeMap<(String, String), bool>,
) -> String {
    let mut out =
        String::from("variant,measure,aggregate,evaluated,excluded,p_value,significant\n");
    for name in variant_order {
        let report = &reports[name];
        for label in labels {
            let aggregate = report.aggregates.get(label).copied().unwrap_or(0.0);
            let evaluated = report
                .per_query
                .values()
                .filter(|m| m.contains_key(label))
                .count();
            let excluded = report.excluded.get(label).copied().unwrap_or(0);
            let key = (name.clone(), label.clone());
            let (p, sig) = if name == baseline {
                (String::new(), String::new())
            } else {
                (
                    p_values
                        .get(&key)
                        .map(|p| p.to_string())
                        .unwrap_or_default(),
                    significant
                        .get(&key)
                        .map(|s| s.to_string())
                        .unwrap_or_default(),
                )
            };
            out.push_str(&format!(
                "{name},{label},{aggregate:.6},{evaluated},{excluded},{p},{sig}\n"
            ));
        }
    }
    out
}

/// CSV of per-query values, one row per (qid, variant, measure).
pub fn render_per_query_csv(
    variant_order: &[String],
    reports: &BTreeMap<String, MeasureReport>,
    labels: &[String],
) -> String {
    let mut out = String::from("qid,variant,measure,value\n");
    for name in variant_order {
        let report = &reports[name];
        for (qid, values) in &report.per_query {
            for label in labels {
                if let Some(v) = values.get(label) {
                    out.push_str(&format!("{qid},{name},{label},{v:.6}\n"));
                }
            }
        }
    }
    out
}

/// Renders a stored reference table (CSV of reported values) as aligned
/// text, reformatting numeric cells through `format_metric`.
pub fn render_reference_table(csv_text: &str) -> String {
    let rows: Vec<Vec<String>> = csv_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split(',')
                .enumerate()
                .map(|(i, cell)| {
                    let cell = cell.trim();
                    if i > 0 {
                        if let Ok(v) = cell.parse::<f64>() {
                            if cell.contains('.') {
                                return format_metric(v);
                            }
                        }
                    }
                    cell.to_string()
                })
                .collect()
        })
        .collect();
    align(&rows)
}
