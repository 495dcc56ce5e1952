//! CSV and JSON emission of run results.
//!
//! CSV numbers carry 17 significant digits; JSON numbers use the shortest
//! representation that parses back to the same `f64`.

use std::io::Write;
use std::path::Path;

use super::config::OutputFormat;
use super::run::{ResultRow, RunResult};
use super::HarnessError;

pub const CSV_HEADER: [&str; 6] = ["scenario", "n_or_window", "exact_value", "mc_estimate", "mc_stderr", "verdict"];

/// Values allowed in the verdict column.
pub const VERDICTS: [&str; 8] = [
    "Convergent",
    "Divergent",
    "Indeterminate",
    "IO_Zero",
    "IO_One",
    "NotApplicable",
    "ConvergesAS",
    "DoesNotConvergeAS",
];

pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub fn render_csv(rows: &[ResultRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| HarnessError::Runtime(e.to_string());
    w.write_record(CSV_HEADER).map_err(map)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.n_or_window.clone(),
            cell(r.exact_value),
            cell(r.mc_estimate),
            cell(r.mc_stderr),
            r.verdict.clone().unwrap_or_default(),
        ])
        .map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_json(result: &RunResult) -> Result<String, HarnessError> {
    let mut s = serde_json::to_string_pretty(result).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn render(result: &RunResult, format: OutputFormat) -> Result<String, HarnessError> {
    match format {
        OutputFormat::Csv => render_csv(&result.rows),
        OutputFormat::Json => render_json(result),
    }
}

/// Writes `result` to `path`, or to standard output when `path` is `None`.
pub fn emit(result: &RunResult, format: OutputFormat, path: Option<&Path>) -> Result<(), HarnessError> {
    let text = render(result, format)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
