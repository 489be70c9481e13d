//! Newline-delimited JSON trace files.
//!
//! Each line is `{"step": S, "depth": D, "p": [...], "q": [...]}`. Arrays are
//! written in plain decimal using the shortest representation that parses
//! back to the same `f64`, so a written trace replays bit-for-bit. An
//! optional first line `{"header": {...}}` carries run provenance and is
//! skipped on load.

use std::io::{BufRead, Write};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::simplex::{Distribution, SUM_TOLERANCE};
use crate::treesim::{Trace, TraceRecord};

/// Largest deviation from unit mass that loading repairs by rescaling.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;

fn write_array(out: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    out.write_all(b"[")?;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{v}")?;
    }
    out.write_all(b"]")
}

/// Writes one record as a single line.
pub fn write_record(out: &mut impl Write, record: &TraceRecord) -> std::io::Result<()> {
    write!(out, "{{\"step\":{},\"depth\":{},\"p\":", record.step, record.depth)?;
    write_array(out, record.p.probs())?;
    out.write_all(b",\"q\":")?;
    write_array(out, record.q.probs())?;
    out.write_all(b"}\n")
}

/// Records plus a note of how many arrays were rescaled on load.
#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub records: Vec<TraceRecord>,
    pub renormalized: usize,
    pub max_deviation: f64,
}

impl LoadedTrace {
    pub fn into_trace(self) -> Result<Trace> {
        Trace::new(self.records)
    }
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn index_field(obj: &serde_json::Map<String, Value>, line: usize, field: &str) -> Result<u64> {
    obj.get(field)
        .ok_or_else(|| parse_err(line, field, "missing"))?
        .as_u64()
        .ok_or_else(|| parse_err(line, field, "expected a non-negative integer"))
}

fn dist_field(
    obj: &serde_json::Map<String, Value>,
    line: usize,
    field: &str,
    loaded: &mut LoadedTrace,
) -> Result<Distribution> {
    let arr = obj
        .get(field)
        .ok_or_else(|| parse_err(line, field, "missing"))?
        .as_array()
        .ok_or_else(|| parse_err(line, field, "expected an array of numbers"))?;
    let mut values = Vec::with_capacity(arr.len());
    for (i, v) in arr.iter().enumerate() {
        let x = v
            .as_f64()
            .ok_or_else(|| parse_err(line, &format!("{field}[{i}]"), "expected a number"))?;
        if !x.is_finite() || x < 0.0 {
            return Err(parse_err(line, &format!("{field}[{i}]"), format!("{x} is not a probability")));
        }
        values.push(x);
    }
    if values.is_empty() {
        return Err(parse_err(line, field, "empty array"));
    }
    let dev = (values.iter().sum::<f64>() - 1.0).abs();
    if dev > RENORMALIZE_LIMIT {
        return Err(parse_err(line, field, format!("sums to 1 ± {dev:e}, beyond {RENORMALIZE_LIMIT:e}")));
    }
    loaded.max_deviation = loaded.max_deviation.max(dev);
    let dist = if dev > SUM_TOLERANCE {
        loaded.renormalized += 1;
        Distribution::normalized(values)
    } else {
        Distribution::new(values)
    };
    dist.map_err(|e| parse_err(line, field, e.to_string()))
}

/// Reads a trace; line numbers in errors are 1-based.
pub fn read_trace(input: impl BufRead) -> Result<LoadedTrace> {
    let mut loaded = LoadedTrace {
        records: Vec::new(),
        renormalized: 0,
        max_deviation: 0.0,
    };
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| parse_err(n, "<line>", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err(n, "<line>", "expected a JSON object"))?;
        if obj.contains_key("header") {
            continue;
        }
        let step = index_field(obj, n, "step")?;
        let depth = index_field(obj, n, "depth")?;
        let p = dist_field(obj, n, "p", &mut loaded)?;
        let q = dist_field(obj, n, "q", &mut loaded)?;
        if p.len() != q.len() {
            return Err(parse_err(
                n,
                "q",
                format!("length {} differs from p's {}", q.len(), p.len()),
            ));
        }
        loaded.records.push(TraceRecord { step, depth, p, q });
    }
    Ok(loaded)
}
