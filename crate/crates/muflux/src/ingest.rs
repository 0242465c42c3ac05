//! The counter log format and windowed rate aggregation.
//!
//! A log file is the header line `# muflux-log v1` followed by CSV records
//!
//! ```text
//! timestamp,ch1,ch2,coinc,temp_c,rh_pct,p_hpa
//! ```
//!
//! with ISO-8601 UTC timestamps at second resolution and empty fields for
//! missing telemetry. Counts are per-interval deltas, NOT cumulative
//! totals: each record carries the counts accumulated since the previous
//! record. Feeding cumulative counter values in will double-count.
//!
//! Malformed lines are collected as diagnostics rather than aborting the
//! parse, up to a configurable budget; a wrong header is always fatal.

use std::io::BufRead;

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::counting::RateMeasurement;
use crate::error::{Error, Result};

/// First line of every log file.
pub const LOG_HEADER: &str = "# muflux-log v1";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// One sample: per-interval channel counts plus optional environment
/// telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub timestamp: DateTime<Utc>,
    pub ch1_counts: u64,
    pub ch2_counts: u64,
    pub coinc_counts: u64,
    pub temperature_c: Option<f64>,
    pub humidity_pct: Option<f64>,
    pub pressure_hpa: Option<f64>,
}

/// A line that failed to parse, with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseIssue {
    pub line_number: usize,
    pub message: String,
}

/// Parsed records plus the diagnostics for lines that were dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseOutcome {
    pub records: Vec<LogRecord>,
    pub issues: Vec<ParseIssue>,
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Parsing aborts with a format error once more than this many lines
    /// have been dropped.
    pub max_bad_lines: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { max_bad_lines: 100 }
    }
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .map(|naive| naive.and_utc())
        .map_err(|e| Error::Format(format!("bad timestamp {s:?}: {e}")))
}

/// Parse a log stream with the default bad-line budget.
pub fn parse_log<R: BufRead>(reader: R) -> Result<ParseOutcome> {
    parse_log_with(reader, &ParseOptions::default())
}

/// Parse a log stream. Malformed and out-of-order lines become
/// [`ParseIssue`]s until the budget is exhausted; a missing or wrong header
/// is fatal.
pub fn parse_log_with<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<ParseOutcome> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(Ok(line)) => line,
        Some(Err(e)) => return Err(Error::Format(format!("read error on header line: {e}"))),
        None => return Err(Error::Format("empty stream: missing log header".into())),
    };
    if header != LOG_HEADER {
        return Err(Error::Format(format!(
            "wrong header: expected {LOG_HEADER:?}, found {header:?}"
        )));
    }

    let mut outcome = ParseOutcome::default();
    for (idx, line) in lines.enumerate() {
        let line_number = idx + 2;
        let line =
            line.map_err(|e| Error::Format(format!("read error at line {line_number}: {e}")))?;
        if line.is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(record) => {
                if let Some(last) = outcome.records.last() {
                    if record.timestamp < last.timestamp {
                        outcome.issues.push(ParseIssue {
                            line_number,
                            message: format!(
                                "timestamp {} goes backwards (previous {})",
                                format_timestamp(&record.timestamp),
                                format_timestamp(&last.timestamp)
                            ),
                        });
                        check_budget(&outcome, opts)?;
                        continue;
                    }
                }
                outcome.records.push(record);
            }
            Err(message) => {
                outcome.issues.push(ParseIssue {
                    line_number,
                    message,
                });
                check_budget(&outcome, opts)?;
            }
        }
    }
    Ok(outcome)
}

fn check_budget(outcome: &ParseOutcome, opts: &ParseOptions) -> Result<()> {
    if outcome.issues.len() > opts.max_bad_lines {
        return Err(Error::Format(format!(
            "more than {} bad lines; giving up (first: line {}: {})",
            opts.max_bad_lines, outcome.issues[0].line_number, outcome.issues[0].message
        )));
    }
    Ok(())
}

fn parse_record(line: &str) -> std::result::Result<LogRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, found {}", fields.len()));
    }
    let timestamp = parse_timestamp(fields[0]).map_err(|e| e.to_string())?;
    let counts = |name: &str, s: &str| -> std::result::Result<u64, String> {
        s.parse::<u64>()
            .map_err(|e| format!("bad {name} count {s:?}: {e}"))
    };
    let telemetry = |name: &str, s: &str| -> std::result::Result<Option<f64>, String> {
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s
            .parse()
            .map_err(|e| format!("bad {name} value {s:?}: {e}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite {name} value {s:?}"));
        }
        Ok(Some(v))
    };
    Ok(LogRecord {
        timestamp,
        ch1_counts: counts("ch1", fields[1])?,
        ch2_counts: counts("ch2", fields[2])?,
        coinc_counts: counts("coinc", fields[3])?,
        temperature_c: telemetry("temperature", fields[4])?,
        humidity_pct: telemetry("humidity", fields[5])?,
        pressure_hpa: telemetry("pressure", fields[6])?,
    })
}

/// Render records back into the exact file format (header included). Parsing
/// the result reproduces the records bit for bit.
pub fn serialize_log(records: &[LogRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format_timestamp(&r.timestamp));
        for counts in [r.ch1_counts, r.ch2_counts, r.coinc_counts] {
            out.push(',');
            out.push_str(&counts.to_string());
        }
        for telemetry in [r.temperature_c, r.humidity_pct, r.pressure_hpa] {
            out.push(',');
            if let Some(v) = telemetry {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    out
}

/// Windowed aggregate of a record span. Rates follow the counting module
/// conventions; telemetry fields are means over the records that carried a
/// value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub records: usize,
    pub ch1: RateMeasurement,
    pub ch2: RateMeasurement,
    pub coincidence: RateMeasurement,
    pub mean_temperature_c: Option<f64>,
    pub mean_humidity_pct: Option<f64>,
    pub mean_pressure_hpa: Option<f64>,
    /// True when the trailing window ends past the covered record span.
    pub partial: bool,
}

/// Sum counts into tumbling windows of `window_min` minutes anchored at the
/// first record.
///
/// The per-record live time is the modal spacing between consecutive
/// records (60 s when it cannot be inferred), so clock gaps reduce a
/// window's live time instead of being interpolated; windows with no
/// records at all produce no summary. Records must be time-sorted.
pub fn aggregate(records: &[LogRecord], window_min: u32) -> Result<Vec<RateSummary>> {
    if window_min == 0 {
        return Err(Error::domain("window must be at least one minute"));
    }
    if records.is_empty() {
        return Ok(Vec::new());
    }
    for pair in records.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::Data(format!(
                "records are not time-sorted near {}",
                format_timestamp(&pair[1].timestamp)
            )));
        }
    }

    let cadence_s = infer_cadence_seconds(records);
    let window_s = i64::from(window_min) * 60;
    let t0 = records[0].timestamp;

    let mut summaries = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let window_index = (records[start].timestamp - t0).num_seconds() / window_s;
        let window_start = t0 + chrono::Duration::seconds(window_index * window_s);
        let window_end = window_start + chrono::Duration::seconds(window_s);
        let mut end = start;
        while end < records.len() && records[end].timestamp < window_end {
            end += 1;
        }
        let slice = &records[start..end];
        summaries.push(summarize_window(
            slice,
            window_start,
            window_end,
            cadence_s,
        )?);
        start = end;
    }

    // only the trailing window can be partial: it is flagged when the data
    // span (last record plus one cadence) stops short of the window edge
    if let (Some(last_summary), Some(last_record)) = (summaries.last_mut(), records.last()) {
        let covered_to = last_record.timestamp + chrono::Duration::seconds(cadence_s);
        last_summary.partial = covered_to < last_summary.window_end;
    }
    Ok(summaries)
}

fn summarize_window(
    slice: &[LogRecord],
    window_start: DateTime<Utc>,
    window_end: DateTime<Utc>,
    cadence_s: i64,
) -> Result<RateSummary> {
    let live_time_min = slice.len() as f64 * cadence_s as f64 / 60.0;
    let total = |pick: fn(&LogRecord) -> u64| slice.iter().map(pick).sum::<u64>();
    let mean = |pick: fn(&LogRecord) -> Option<f64>| {
        let values: Vec<f64> = slice.iter().filter_map(pick).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    Ok(RateSummary {
        window_start,
        window_end,
        records: slice.len(),
        ch1: RateMeasurement::new(total(|r| r.ch1_counts), live_time_min)?,
        ch2: RateMeasurement::new(total(|r| r.ch2_counts), live_time_min)?,
        coincidence: RateMeasurement::new(total(|r| r.coinc_counts), live_time_min)?,
        mean_temperature_c: mean(|r| r.temperature_c),
        mean_humidity_pct: mean(|r| r.humidity_pct),
        mean_pressure_hpa: mean(|r| r.pressure_hpa),
        partial: false,
    })
}

/// Modal positive spacing between consecutive records; ties resolve to the
/// smaller spacing, and 60 s is assumed when no positive spacing exists.
fn infer_cadence_seconds(records: &[LogRecord]) -> i64 {
    let mut diffs: Vec<i64> = records
        .windows(2)
        .map(|p| (p[1].timestamp - p[0].timestamp).num_seconds())
        .filter(|&d| d > 0)
        .collect();
    if diffs.is_empty() {
        return 60;
    }
    diffs.sort_unstable();
    let mut best = (diffs[0], 1usize);
    let mut run = (diffs[0], 1usize);
    for &d in &diffs[1..] {
        if d == run.0 {
            run.1 += 1;
        } else {
            run = (d, 1);
        }
        if run.1 > best.1 {
            best = run;
        }
    }
    best.0
}
