//! Two-column `date,close` CSV input and one-value-per-line sample files.

use std::path::Path;

use chrono::NaiveDate;
use rvdk_core::rvcalc::PriceSeries;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: NaiveDate },
    #[error("line {line}: date {date} precedes {prev}; input must be sorted ascending")]
    Unsorted { line: u64, date: NaiveDate, prev: NaiveDate },
    #[error("line {line}: close must be positive (got {value})")]
    NonPositive { line: u64, value: f64 },
    #[error("{0}")]
    Series(#[from] rvdk_core::Error),
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

pub fn ingest_csv(path: &Path) -> Result<PriceSeries, IngestError> {
    parse_prices(&read(path)?)
}

/// Parses `YYYY-MM-DD,close` rows. A first row whose date does not parse is
/// taken as a header; blank lines are skipped.
pub fn parse_prices(text: &str) -> Result<PriceSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut closes = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let is_first = std::mem::replace(&mut first, false);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(IngestError::Malformed {
                line,
                msg: format!("expected 2 fields (date,close), found {}", record.len()),
            });
        }
        let date = match NaiveDate::parse_from_str(&record[0], "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) if is_first => continue,
            Err(e) => {
                return Err(IngestError::Malformed { line, msg: format!("bad date '{}': {e}", &record[0]) })
            }
        };
        let close: f64 = record[1]
            .parse()
            .map_err(|e| IngestError::Malformed { line, msg: format!("bad close '{}': {e}", &record[1]) })?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(IngestError::NonPositive { line, value: close });
        }
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(IngestError::DuplicateDate { line, date });
            }
            if date < prev {
                return Err(IngestError::Unsorted { line, date, prev });
            }
        }
        dates.push(date);
        closes.push(close);
    }
    Ok(PriceSeries::new(dates, closes)?)
}

/// Reads positive sample values, one per line; blank lines and lines
/// starting with `#` are ignored.
pub fn read_values(path: &Path) -> Result<Vec<f64>, IngestError> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|e| IngestError::Malformed {
            line: i as u64 + 1,
            msg: format!("bad value '{t}': {e}"),
        })?;
        out.push(v);
    }
    Ok(out)
}
