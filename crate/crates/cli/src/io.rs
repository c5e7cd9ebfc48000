//! CSV and JSON files: samples, mechanisms, result tables and sidecars.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use putlab::prob::{Alphabet, Mechanism, SampleSet};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// One label per line; blank lines are skipped.
pub fn read_alphabet(path: &Path) -> CliResult<Alphabet> {
    let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    let mut labels: Vec<String> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let label = line.trim();
        if label.is_empty() {
            continue;
        }
        if labels.iter().any(|l| l == label) {
            return Err(CliError::parse(path, i as u64 + 1, format!("duplicate label {label:?}")));
        }
        labels.push(label.to_string());
    }
    if labels.is_empty() {
        return Err(CliError::parse(path, 1, "alphabet file lists no labels"));
    }
    Ok(Alphabet::new(labels)?)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::read(path, io),
        csv::ErrorKind::Utf8 { err, .. } => CliError::parse(path, line, format!("invalid UTF-8: {err}")),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            CliError::parse(path, line, format!("expected {expected_len} fields, found {len}"))
        }
        other => CliError::parse(path, line, format!("{other:?}")),
    }
}

/// Symbols either fixed up front or collected in order of first appearance.
struct Labels {
    fixed: Option<Alphabet>,
    seen: Vec<String>,
}

impl Labels {
    fn new(fixed: Option<Alphabet>) -> Self {
        Labels { fixed, seen: Vec::new() }
    }

    fn index(&mut self, label: &str) -> Option<usize> {
        match &self.fixed {
            Some(a) => a.index_of(label),
            None => Some(self.seen.iter().position(|l| l == label).unwrap_or_else(|| {
                self.seen.push(label.to_string());
                self.seen.len() - 1
            })),
        }
    }

    fn finish(self) -> putlab::Result<Alphabet> {
        match self.fixed {
            Some(a) => Ok(a),
            None => Alphabet::new(self.seen),
        }
    }
}

/// Reads a sample file with header `s,x`. Alphabets come from the optional
/// alphabet files, otherwise from first appearance.
pub fn read_samples(path: &Path, s_alphabet: Option<Alphabet>, x_alphabet: Option<Alphabet>) -> CliResult<SampleSet> {
    let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["s", "x"] {
        return Err(CliError::parse(path, 1, format!("expected header \"s,x\", found {:?}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut s_labels = Labels::new(s_alphabet);
    let mut x_labels = Labels::new(x_alphabet);
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let (s, x) = (record[0].trim(), record[1].trim());
        if s.is_empty() || x.is_empty() {
            return Err(CliError::parse(path, line, "empty label"));
        }
        let si = s_labels.index(s).ok_or_else(|| CliError::parse(path, line, format!("s label {s:?} is not in the S alphabet")))?;
        let xi = x_labels.index(x).ok_or_else(|| CliError::parse(path, line, format!("x label {x:?} is not in the X alphabet")))?;
        pairs.push((si, xi));
    }
    if pairs.is_empty() {
        return Err(CliError::parse(path, 1, "no samples after the header"));
    }
    Ok(SampleSet::new(s_labels.finish()?, x_labels.finish()?, pairs)?)
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> Vec<u8> {
    writer.into_inner().expect("writing to memory cannot fail")
}

pub fn samples_csv(samples: &SampleSet) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["s", "x"]).expect("in-memory write");
    let (sa, xa) = (samples.s_alphabet().labels(), samples.x_alphabet().labels());
    for &(s, x) in samples.pairs() {
        w.write_record([&sa[s], &xa[x]]).expect("in-memory write");
    }
    finish_csv(w)
}

/// Header `x,<output labels>`; one row per input symbol.
pub fn mechanism_csv(w: &Mechanism) -> Vec<u8> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("x").chain(w.y_alphabet().labels().iter().map(String::as_str)).collect();
    out.write_record(&header).expect("in-memory write");
    for (i, label) in w.x_alphabet().labels().iter().enumerate() {
        let row: Vec<String> = std::iter::once(label.clone()).chain((0..w.n_outputs()).map(|y| w.get(i, y).to_string())).collect();
        out.write_record(&row).expect("in-memory write");
    }
    finish_csv(out)
}

pub fn read_mechanism(path: &Path) -> CliResult<Mechanism> {
    let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 || header[0].trim() != "x" {
        return Err(CliError::parse(path, 1, "expected header \"x,<output labels>\""));
    }
    let outputs = Alphabet::new(header.iter().skip(1).map(|l| l.trim().to_string())).map_err(|e| CliError::parse(path, 1, e.to_string()))?;
    let mut inputs = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        inputs.push(record[0].trim().to_string());
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| CliError::parse(path, line, format!("not a number: {field:?}")))?;
            values.push(v);
        }
    }
    let inputs = Alphabet::new(inputs).map_err(|e| CliError::parse(path, 2, e.to_string()))?;
    let rows = Array2::from_shape_vec((inputs.len(), outputs.len()), values).expect("row lengths were checked by the reader");
    Ok(Mechanism::with_outputs(inputs, outputs, rows)?)
}

/// A result table with a header row.
pub fn rows_csv<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Config(format!("cannot serialize a result row: {e}")))?;
    }
    Ok(finish_csv(w))
}

/// Reads a table written by [`rows_csv`].
pub fn read_rows<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    reader.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("result documents serialize");
    out.push(b'\n');
    out
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}
