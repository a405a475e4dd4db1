//! Text formats: libsvm datasets, CSV traces and delay logs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use asyncmb_core::{DataPoint, Dataset, LossKind, TracePoint};

use crate::error::{AppError, Result};

pub const CSV_HEADER: &str = "k,phi,dist_sq,tau,gamma,wall_ns";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Parses libsvm text. File indices are 1-based; stored indices are 0-based.
///
/// Under the logistic loss labels are mapped to `±1` (`0` and negatives to −1).
/// The dimension is the largest index seen, or `min_dim` if that is larger.
pub fn parse_libsvm(text: &str, loss: LossKind, min_dim: usize, origin: &Path) -> Result<Dataset> {
    let err = |line: usize, msg: String| AppError::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut points = Vec::new();
    let mut dim = min_dim;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let mut label: f64 = label_tok
            .parse()
            .map_err(|_| err(line, format!("bad label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(err(line, format!("bad label '{label_tok}'")));
        }
        if loss == LossKind::Logistic {
            label = if label > 0.0 { 1.0 } else { -1.0 };
        }
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(line, format!("malformed token '{tok}'")))?;
            if i == "qid" {
                continue;
            }
            let idx: u64 = i
                .parse()
                .map_err(|_| err(line, format!("bad index in '{tok}'")))?;
            let val: f64 = v
                .parse()
                .map_err(|_| err(line, format!("bad value in '{tok}'")))?;
            if idx == 0 || idx > u32::MAX as u64 {
                return Err(err(line, format!("index out of range in '{tok}'")));
            }
            if !val.is_finite() {
                return Err(err(line, format!("non-finite value in '{tok}'")));
            }
            let idx = (idx - 1) as u32;
            if indices.last().is_some_and(|&last| idx <= last) {
                return Err(err(line, format!("non-increasing index in '{tok}'")));
            }
            indices.push(idx);
            values.push(val);
        }
        if let Some(&last) = indices.last() {
            dim = dim.max(last as usize + 1);
        }
        points.push(DataPoint::new(indices, values, label).map_err(|e| err(line, e.to_string()))?);
    }
    Ok(Dataset::new(points, dim.max(1))?.with_source(origin.display().to_string()))
}

pub fn read_libsvm(path: &Path, loss: LossKind, min_dim: usize) -> Result<Dataset> {
    parse_libsvm(&read_text(path)?, loss, min_dim, path)
}

/// Serializes a dataset in libsvm format with round-trip exact floats.
pub fn format_libsvm(dataset: &Dataset) -> String {
    let mut out = String::new();
    for p in dataset.points() {
        write!(out, "{}", p.label).unwrap();
        for (i, v) in p.indices().iter().zip(p.values()) {
            write!(out, " {}:{}", i + 1, v).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(dataset: &Dataset, path: &Path) -> Result<()> {
    write_text(path, &format_libsvm(dataset))
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for tp in trace {
        let dist = tp.dist_sq.map(fmt_f64).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            tp.k,
            fmt_f64(tp.phi),
            dist,
            tp.tau,
            fmt_f64(tp.gamma),
            tp.wall_ns
        )
        .unwrap();
    }
    out
}

pub fn write_csv(trace: &[TracePoint], path: &Path) -> Result<()> {
    write_text(path, &format_csv(trace))
}

/// Reads a CSV written by [`write_csv`]. `phi_last` is not stored and comes
/// back equal to `phi`.
pub fn read_csv(path: &Path) -> Result<Vec<TracePoint>> {
    let text = read_text(path)?;
    let err = |line: usize, msg: &str| AppError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(err(1, "unexpected header"));
    }
    let mut trace = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(err(lineno, "expected 6 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(lineno, "bad number"));
        let int = |s: &str| s.parse::<u64>().map_err(|_| err(lineno, "bad integer"));
        let phi = num(f[1])?;
        trace.push(TracePoint {
            k: int(f[0])?,
            phi,
            phi_last: phi,
            dist_sq: if f[2].is_empty() {
                None
            } else {
                Some(num(f[2])?)
            },
            tau: int(f[3])?,
            gamma: num(f[4])?,
            wall_ns: int(f[5])?,
        });
    }
    Ok(trace)
}

/// One integer per line; line `k` (0-based) holds entry `k`.
pub fn format_int_log<T: std::fmt::Display>(values: &[T]) -> String {
    let mut out = String::with_capacity(values.len() * 6);
    for v in values {
        writeln!(out, "{v}").unwrap();
    }
    out
}

pub fn write_int_log<T: std::fmt::Display>(values: &[T], path: &Path) -> Result<()> {
    write_text(path, &format_int_log(values))
}

pub fn read_int_log<T: std::str::FromStr>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<T>().map_err(|_| AppError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected a non-negative integer, got '{}'", l.trim()),
            })
        })
        .collect()
}
