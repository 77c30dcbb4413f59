//! File formats: signals as `index,value` CSV with a `{dt, sigma}` JSON
//! sidecar, and ground truth as `t,energy,theta1,theta2,column` CSV.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{GroundTruth, PulseShape, SampledSignal, SamplingGrid};

/// Format used for every real number written to disk: 17 significant digits,
/// which round-trips any `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sidecar metadata of a signal file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub dt: f64,
    pub sigma: f64,
}

/// `signal.csv` -> `signal.json`.
pub fn sidecar_path(signal_path: &Path) -> PathBuf {
    signal_path.with_extension("json")
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let line = line_of(record);
    let raw = record
        .get(i)
        .ok_or_else(|| parse_err(line, format!("missing column `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{raw}` as {name}")))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != header {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
        ));
    }
    Ok(rdr)
}

/// Reads the values of an `index,value` file. Indices must run `0, 1, 2, ...`.
pub fn read_signal_values(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = reader(path, &["index", "value"])?;
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_err(
                line_of(&rec),
                format!("expected 2 columns, found {}", rec.len()),
            ));
        }
        let index: usize = parse_field(&rec, 0, "index")?;
        let value: f64 = parse_field(&rec, 1, "value")?;
        if index != values.len() {
            return Err(Error::Format(format!(
                "line {}: index {index} where {} was expected",
                line_of(&rec),
                values.len()
            )));
        }
        if !value.is_finite() {
            return Err(parse_err(line_of(&rec), "value is not finite"));
        }
        values.push(value);
    }
    Ok(values)
}

/// A signal read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub signal: SampledSignal,
    /// Number of samples in the file.
    pub original_len: usize,
    /// A trailing zero was appended to make the length even.
    pub padded: bool,
}

/// Reads a signal file, padding an odd sample count with one trailing zero.
pub fn ingest_signal(path: &Path, dt: f64, sigma: f64) -> Result<Ingested> {
    let mut values = read_signal_values(path)?;
    let original_len = values.len();
    if original_len == 0 {
        return Err(Error::Format(format!("{} holds no samples", path.display())));
    }
    let padded = original_len % 2 == 1;
    if padded {
        values.push(0.0);
    }
    let grid = SamplingGrid::new(values.len(), dt)?;
    Ok(Ingested {
        signal: SampledSignal::new(values, grid, sigma)?,
        original_len,
        padded,
    })
}

/// Reads a signal together with its sidecar metadata.
pub fn read_signal(path: &Path) -> Result<Ingested> {
    let meta = read_meta(&sidecar_path(path))?;
    ingest_signal(path, meta.dt, meta.sigma)
}

pub fn read_meta(path: &Path) -> Result<SignalMeta> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

pub fn write_signal_values(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["index", "value"]).map_err(csv_io)?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_real(*v)]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `path` and its JSON sidecar.
pub fn write_signal(path: &Path, signal: &SampledSignal) -> Result<()> {
    write_signal_values(path, signal.samples())?;
    let meta = SignalMeta {
        dt: signal.grid().dt(),
        sigma: signal.noise_sigma(),
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

const TRUTH_HEADER: [&str; 5] = ["t", "energy", "theta1", "theta2", "column"];

/// Writes the ground truth; case I rows fill `column`, case II rows the two
/// gamma parameters.
pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(TRUTH_HEADER).map_err(csv_io)?;
    for (t, e, shape) in truth.events() {
        let (a, b, c) = match shape {
            PulseShape::Column(s) => (String::new(), String::new(), s.to_string()),
            PulseShape::Gamma { theta1, theta2 } => (fmt_real(theta1), fmt_real(theta2), String::new()),
        };
        w.write_record([fmt_real(t), fmt_real(e), a, b, c]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a ground-truth file; `lambda_true` is the nominal rate of the process
/// that generated it.
pub fn read_truth(path: &Path, lambda_true: f64) -> Result<GroundTruth> {
    let mut rdr = reader(path, &TRUTH_HEADER)?;
    let (mut ts, mut es, mut shapes) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        if rec.len() != 5 {
            return Err(parse_err(
                line_of(&rec),
                format!("expected 5 columns, found {}", rec.len()),
            ));
        }
        ts.push(parse_field::<f64>(&rec, 0, "t")?);
        es.push(parse_field::<f64>(&rec, 1, "energy")?);
        let column = rec.get(4).unwrap().trim();
        let shape = if column.is_empty() {
            PulseShape::Gamma {
                theta1: parse_field(&rec, 2, "theta1")?,
                theta2: parse_field(&rec, 3, "theta2")?,
            }
        } else {
            PulseShape::Column(parse_field(&rec, 4, "column")?)
        };
        shapes.push(shape);
    }
    GroundTruth::new(ts, es, shapes, lambda_true)
}
