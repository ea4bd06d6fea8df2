//! Trace environment: outcomes measured elsewhere, looked up by mode key.
//!
//! ```text
//! # ref_rate: 41234.5
//! mode_key,total_rate,fidelity,frame_rates
//! f22-22_r-3_u-3,98213.2,0.991,40000.1;20000.3;19000.5;18212.3
//! ```
//!
//! Lines starting with `#` are comments; the `# ref_rate:` comment is
//! required and normalizes reward rate terms. Unknown keys are errors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::env::{EncodeOutcome, Environment};
use crate::error::{Error, Result};
use crate::mode::{mode_key, ModeSelection};

pub const TRACE_HEADER: [&str; 4] = ["mode_key", "total_rate", "fidelity", "frame_rates"];

#[derive(Clone, Debug, PartialEq)]
struct TraceEntry {
    fidelity: f64,
    frame_rates: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TraceEnv {
    entries: HashMap<String, TraceEntry>,
    ref_rate: f64,
}

impl TraceEnv {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, key: &str) -> Result<EncodeOutcome> {
        let entry = self
            .entries
            .get(key)
            .ok_or_else(|| Error::UnknownMode(key.to_string()))?;
        Ok(EncodeOutcome::from_ctu_rates(
            entry.frame_rates.iter().map(|&r| vec![r]).collect(),
            entry.fidelity,
            self.ref_rate,
        ))
    }
}

impl Environment for TraceEnv {
    fn evaluate(&self, mode: &ModeSelection) -> Result<EncodeOutcome> {
        self.lookup(&mode_key(mode))
    }

    fn ref_rate(&self) -> f64 {
        self.ref_rate
    }
}

fn parse_ref_rate(line: &str) -> Option<&str> {
    line.trim_start()
        .strip_prefix('#')
        .map(str::trim_start)
        .and_then(|rest| rest.strip_prefix("ref_rate:"))
        .map(str::trim)
}

pub fn parse_trace(text: &str, path: &Path) -> Result<TraceEnv> {
    let mut ref_rate = None;
    for (n, line) in text.lines().enumerate() {
        if let Some(v) = parse_ref_rate(line) {
            let value: f64 = v
                .parse()
                .map_err(|_| Error::parse(path, n as u64 + 1, format!("bad ref_rate `{v}`")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::parse(path, n as u64 + 1, "ref_rate must be positive"));
            }
            ref_rate = Some(value);
        }
    }
    let ref_rate = ref_rate.ok_or_else(|| Error::parse(path, 0, "missing `# ref_rate:` comment"))?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header_line = text
        .lines()
        .position(|l| !l.starts_with('#'))
        .map_or(0, |n| n as u64 + 1);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, header_line, e.to_string()))?;
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::parse(
            path,
            header_line,
            format!("missing header `{}`", TRACE_HEADER.join(",")),
        ));
    }

    let mut entries = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| Error::parse(path, line, msg);
        if record.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", record.len())));
        }
        let key = &record[0];
        let mode: ModeSelection = key.parse().map_err(|_| bad(format!("malformed mode key `{key}`")))?;
        let key = mode_key(&mode);
        let num = |field: &str, what: &str| -> Result<f64> {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("bad {what} `{field}`")))
        };
        let total = num(&record[1], "total_rate")?;
        let fidelity = num(&record[2], "fidelity")?;
        let frame_rates = record[3]
            .split(';')
            .map(|f| num(f, "frame rate"))
            .collect::<Result<Vec<_>>>()?;
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(bad(format!("fidelity {fidelity} outside [0, 1]")));
        }
        let sum: f64 = frame_rates.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || frame_rates.iter().any(|&r| r < 0.0) {
            return Err(bad("frame rates must be non-negative with a positive sum".into()));
        }
        if ((sum - total) / sum).abs() > 1e-9 {
            return Err(bad(format!("total_rate {total} is not the sum of frame rates {sum}")));
        }
        if entries
            .insert(key.clone(), TraceEntry { fidelity, frame_rates })
            .is_some()
        {
            return Err(bad(format!("duplicate mode key `{key}`")));
        }
    }
    Ok(TraceEnv { entries, ref_rate })
}

pub fn load_trace(path: &Path) -> Result<TraceEnv> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, path)
}

pub fn trace_to_string<'a>(
    ref_rate: f64,
    rows: impl IntoIterator<Item = (&'a ModeSelection, &'a EncodeOutcome)>,
) -> String {
    let mut out = format!("# ref_rate: {ref_rate}\n{}\n", TRACE_HEADER.join(","));
    for (mode, outcome) in rows {
        let frames: Vec<String> = outcome.frame_rates.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            mode_key(mode),
            outcome.total_rate,
            outcome.fidelity,
            frames.join(";")
        );
    }
    out
}

pub fn write_trace<'a>(
    path: &Path,
    ref_rate: f64,
    rows: impl IntoIterator<Item = (&'a ModeSelection, &'a EncodeOutcome)>,
) -> Result<()> {
    std::fs::write(path, trace_to_string(ref_rate, rows)).map_err(|e| Error::io(path, e))
}
