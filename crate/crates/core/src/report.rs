//! Rendering strategy comparisons as a text table, CSV or JSON.

use serde::Serialize;

use crate::model::CostBreakdown;

pub const CSV_HEADER: [&str; 6] = [
    "strategy",
    "dt_seconds",
    "ml_seconds",
    "dc_seconds",
    "total_seconds",
    "dc_bytes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

/// One strategy's outcome; `cost` is `None` when it could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub strategy: String,
    pub cost: Option<CostBreakdown>,
    /// Why the row has no cost.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReportRow {
    pub fn evaluated(strategy: impl Into<String>, cost: CostBreakdown) -> Self {
        ReportRow {
            strategy: strategy.into(),
            cost: Some(cost),
            note: None,
        }
    }

    pub fn failed(strategy: impl Into<String>, note: impl Into<String>) -> Self {
        ReportRow {
            strategy: strategy.into(),
            cost: None,
            note: Some(note.into()),
        }
    }
}

/// Formats `x` with at most six significant digits and no trailing zeros.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        let s = format!("{x:.5e}");
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (5 - magnitude).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn numbers(cost: &CostBreakdown) -> [f64; 5] {
    [
        cost.dt_seconds,
        cost.ml_seconds,
        cost.dc_seconds,
        cost.total_seconds,
        cost.dc_bytes,
    ]
}

pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(rows),
        ReportFormat::Csv => render_csv(rows),
        ReportFormat::Json => render_json(rows),
    }
}

fn render_table(rows: &[ReportRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut line = vec![row.strategy.clone()];
            match &row.cost {
                Some(cost) => line.extend(numbers(cost).iter().map(|v| format_sig6(*v))),
                None => {
                    line.extend(std::iter::repeat_n("-".to_string(), 5));
                    if let Some(note) = &row.note {
                        line.push(note.clone());
                    }
                }
            }
            line
        })
        .collect();

    let mut widths: Vec<usize> = CSV_HEADER.iter().map(|h| h.len()).collect();
    for line in &cells {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.len());
        }
    }

    let mut out = String::new();
    let header: Vec<String> = CSV_HEADER.iter().map(|h| h.to_string()).collect();
    for line in std::iter::once(&header).chain(&cells) {
        let mut text = String::new();
        for (i, cell) in line.iter().enumerate() {
            if i > 0 {
                text.push_str("  ");
            }
            match (i, widths.get(i)) {
                (0, Some(w)) => text.push_str(&format!("{cell:<w$}")),
                (_, Some(w)) => text.push_str(&format!("{cell:>w$}")),
                (_, None) => text.push_str(cell),
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
    }
    out
}

fn render_csv(rows: &[ReportRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("in-memory write");
    for row in rows {
        let mut record = vec![row.strategy.clone()];
        match &row.cost {
            Some(cost) => record.extend(numbers(cost).iter().map(|v| format_sig6(*v))),
            None => record.extend(std::iter::repeat_n(String::new(), 5)),
        }
        writer.write_record(&record).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

#[derive(Serialize)]
struct JsonRow<'a> {
    strategy: &'a str,
    dt_seconds: Option<f64>,
    ml_seconds: Option<f64>,
    dc_seconds: Option<f64>,
    total_seconds: Option<f64>,
    dc_bytes: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

fn render_json(rows: &[ReportRow]) -> String {
    let rows: Vec<JsonRow> = rows
        .iter()
        .map(|row| JsonRow {
            strategy: &row.strategy,
            dt_seconds: row.cost.map(|c| c.dt_seconds),
            ml_seconds: row.cost.map(|c| c.ml_seconds),
            dc_seconds: row.cost.map(|c| c.dc_seconds),
            total_seconds: row.cost.map(|c| c.total_seconds),
            dc_bytes: row.cost.map(|c| c.dc_bytes),
            note: row.note.as_deref(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&rows).expect("rows serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost(dt: f64, ml: f64, dc: f64) -> CostBreakdown {
        CostBreakdown {
            dt_seconds: dt,
            ml_seconds: ml,
            dc_seconds: dc,
            total_seconds: dt + ml + dc,
            dc_bytes: dc * 125_000.0,
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(77.6), "77.6");
        assert_eq!(format_sig6(2940.0982456), "2940.1");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(400.0), "400");
        assert_eq!(format_sig6(50_000_000.0), "50000000");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(-12.5), "-12.5");
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = [
            ReportRow::evaluated("cloud", cost(10.0, 4.0, 400.0)),
            ReportRow::failed("fog", "infeasible"),
        ];
        let text = render_report(&rows, ReportFormat::Csv);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            "strategy,dt_seconds,ml_seconds,dc_seconds,total_seconds,dc_bytes"
        );
        assert_eq!(lines[1], "cloud,10,4,400,414,50000000");
        assert_eq!(lines[2], "fog,,,,,");
    }

    #[test]
    fn json_keeps_exact_values() {
        let rows = [
            ReportRow::evaluated("hybrid", cost(0.1, 0.2, 0.0)),
            ReportRow::failed("fog", "ram exceeded on `fog`"),
        ];
        let value: serde_json::Value =
            serde_json::from_str(&render_report(&rows, ReportFormat::Json)).unwrap();
        assert_eq!(value[0]["total_seconds"].as_f64().unwrap(), 0.1 + 0.2);
        assert!(value[1]["total_seconds"].is_null());
        assert_eq!(value[1]["note"], "ram exceeded on `fog`");
    }

    #[test]
    fn table_aligns_columns() {
        let rows = [
            ReportRow::evaluated("cloud", cost(10.0, 4.0, 400.0)),
            ReportRow::evaluated("fog+cloud", cost(1.0, 2.0, 3.0)),
        ];
        let text = render_report(&rows, ReportFormat::Table);
        let lengths: Vec<_> = text.lines().map(|l| l.len()).collect();
        assert!(lengths.windows(2).all(|w| w[0] == w[1]), "{text}");
    }
}
