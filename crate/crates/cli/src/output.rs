use std::io::Write;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// JSON has no infinity; unbounded dual values are written as `"inf"`.
pub fn number(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// `rows` as CSV with a header taken from the first row's field names.
pub fn csv<T: Serialize>(rows: &[T]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

/// A report made of top-level fields plus one table; CSV prints the table only.
pub fn table<T: Serialize, R: Serialize>(format: Format, report: &T, rows: &[R]) -> Result<String, String> {
    match format {
        Format::Json => Ok(json(report)),
        Format::Csv => csv(rows),
    }
}

pub fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not an error worth reporting
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}
