// SPDX-License-Identifier: Apache-2.0

//! `samples.csv`: one `replica,t,function_id,value` row per measurement.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slowbond::FieldSample;

use crate::error::CliError;

pub const HEADER: [&str; 4] = ["replica", "t", "function_id", "value"];

#[derive(Debug, Serialize, Deserialize)]
pub struct Row<'a> {
    pub replica: usize,
    pub t: f64,
    pub function_id: &'a str,
    pub value: f64,
}

pub fn rows(samples: &[Vec<FieldSample>]) -> impl Iterator<Item = Row<'_>> {
    samples.iter().enumerate().flat_map(|(replica, stream)| {
        stream.iter().flat_map(move |s| {
            s.values.iter().map(move |(id, value)| Row { replica, t: s.t, function_id: id, value: *value })
        })
    })
}

/// Reads a samples file back into per-replica streams.
pub fn read(path: &Path) -> Result<Vec<Vec<FieldSample>>, CliError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| data(path, e))?;
    let header = reader.headers().map_err(|e| data(path, e))?;
    if header.iter().ne(HEADER) {
        return Err(CliError::Data(format!("{}: expected header {}", path.display(), HEADER.join(","))));
    }
    let mut streams: BTreeMap<usize, Vec<FieldSample>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(data(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(reader.headers().map_err(|e| data(path, e))?))
            .map_err(|e| CliError::Data(format!("{}: row at line {line}: {e}", path.display())))?;
        if !row.t.is_finite() || !row.value.is_finite() {
            return Err(CliError::Data(format!("{}: row at line {line}: non-finite value", path.display())));
        }
        let stream = streams.entry(row.replica).or_default();
        match stream.last_mut() {
            Some(last) if last.t == row.t => last.values.push((row.function_id.to_string(), row.value)),
            Some(last) if last.t > row.t => {
                return Err(CliError::Data(format!(
                    "{}: row at line {line}: time {} precedes {} in replica {}",
                    path.display(),
                    row.t,
                    last.t,
                    row.replica
                )))
            }
            _ => stream.push(FieldSample { t: row.t, values: vec![(row.function_id.to_string(), row.value)] }),
        }
    }
    if streams.is_empty() {
        return Err(CliError::Data(format!("{}: no samples", path.display())));
    }
    if let Some((&last, _)) = streams.iter().next_back() {
        if last + 1 != streams.len() {
            return Err(CliError::Data(format!("{}: replica indices are not contiguous", path.display())));
        }
    }
    Ok(streams.into_values().collect())
}

fn data(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(p) => CliError::Data(format!("{}: row at line {}: {e}", path.display(), p.line())),
        None => CliError::Data(format!("{}: {e}", path.display())),
    }
}
