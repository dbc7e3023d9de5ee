//! CSV pattern and label files, and atomic output.
//!
//! Pattern files have a header with columns `x`, `y` and optionally `label`
//! (`clutter` or `feature`); other columns are ignored. The window of a
//! pattern read from disk is the bounding box of its points.

use std::fs;
use std::io::Write;
use std::path::Path;

use knnclutter::{Label, Point, PointPattern, Window};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    CliError::parse(path, line, e.to_string())
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn parse_label(s: &str) -> Option<Label> {
    match s {
        "feature" | "true" | "1" => Some(Label::Feature),
        "clutter" | "false" | "0" => Some(Label::Clutter),
        _ => None,
    }
}

/// A parsed pattern file.
#[derive(Debug)]
pub struct PatternFile {
    pub pattern: PointPattern,
    pub sha256: String,
}

pub fn read_pattern(path: &Path) -> CliResult<PatternFile> {
    let bytes = read_bytes(path)?;
    let sha256 = sha256_hex(&bytes);
    let mut rdr = reader(&bytes);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let (Some(ix), Some(iy)) = (column(&headers, "x"), column(&headers, "y")) else {
        return Err(CliError::parse(
            path,
            Some(1),
            "header must contain columns x and y",
        ));
    };
    let il = column(&headers, "label");

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line());
        let num = |i: usize, name: &str| -> CliResult<f64> {
            let s = rec.get(i).unwrap_or("");
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::parse(
                    path,
                    line,
                    format!("{name} = '{s}' is not a finite number"),
                )),
            }
        };
        points.push(Point::new(num(ix, "x")?, num(iy, "y")?));
        if let Some(il) = il {
            let s = rec.get(il).unwrap_or("");
            let l = parse_label(s).ok_or_else(|| {
                CliError::parse(
                    path,
                    line,
                    format!("unknown label '{s}' (expected clutter or feature)"),
                )
            })?;
            labels.push(l);
        }
    }
    if points.is_empty() {
        return Err(CliError::parse(path, None, "no data rows"));
    }
    let window = Window::bounding(&points)?;
    let mut pattern = PointPattern::new(points, window)?;
    if il.is_some() {
        pattern = pattern.with_truth(labels)?;
    }
    Ok(PatternFile { pattern, sha256 })
}

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> CliResult<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

fn csv_write_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, e.into())
}

pub fn write_pattern(path: &Path, pattern: &PointPattern) -> CliResult<()> {
    let err = csv_write_err(path);
    let mut w = csv::Writer::from_writer(Vec::new());
    match pattern.truth() {
        Some(truth) => {
            w.write_record(["x", "y", "label"]).map_err(&err)?;
            for (p, l) in pattern.points().iter().zip(truth) {
                w.write_record([p.x.to_string(), p.y.to_string(), l.as_str().to_string()])
                    .map_err(&err)?;
            }
        }
        None => {
            w.write_record(["x", "y"]).map_err(&err)?;
            for p in pattern.points() {
                w.write_record([p.x.to_string(), p.y.to_string()])
                    .map_err(&err)?;
            }
        }
    }
    finish(path, w)
}

/// One row of a labels file; `index` is the row of the point in the input.
pub struct LabelRow {
    pub index: usize,
    pub point: Point,
    pub is_feature: bool,
    pub delta: f64,
}

pub fn write_labels(path: &Path, rows: impl IntoIterator<Item = LabelRow>) -> CliResult<()> {
    let err = csv_write_err(path);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "x", "y", "is_feature", "delta"])
        .map_err(&err)?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.point.x.to_string(),
            r.point.y.to_string(),
            r.is_feature.to_string(),
            r.delta.to_string(),
        ])
        .map_err(&err)?;
    }
    finish(path, w)
}

/// Reads a `label` or `is_feature` column; `None` when the file has neither.
pub fn read_label_column(path: &Path) -> CliResult<Option<Vec<Label>>> {
    let bytes = read_bytes(path)?;
    let mut rdr = reader(&bytes);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let Some(col) = column(&headers, "label").or_else(|| column(&headers, "is_feature")) else {
        return Ok(None);
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let s = rec.get(col).unwrap_or("");
        let l = parse_label(s).ok_or_else(|| {
            CliError::parse(
                path,
                rec.position().map(|p| p.line()),
                format!("unknown label '{s}'"),
            )
        })?;
        out.push(l);
    }
    Ok(Some(out))
}

/// Writes rows of serializable records with a header row.
pub fn write_serialized<T: serde::Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let err = csv_write_err(path);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(&err)?;
    }
    finish(path, w)
}
