//! Weight table on disk: `node,option,w_pos,w_neg,successes,failures`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::decision::{WeightEntry, WeightTable};
use crate::dsl::fmt_number;

pub const WEIGHTS_HEADER: [&str; 6] = ["node", "option", "w_pos", "w_neg", "successes", "failures"];

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: weight out of range [0,1]: {value}")]
    OutOfRange { line: u64, value: f64 },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WeightsError + '_ {
    move |source| WeightsError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn weights_to_csv(t: &WeightTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing to a Vec cannot fail
    w.write_record(WEIGHTS_HEADER).expect("in-memory write");
    for (node, option, e) in t.iter() {
        w.write_record([
            node.to_owned(),
            option.to_owned(),
            fmt_number(e.w_pos),
            fmt_number(e.w_neg),
            e.successes.to_string(),
            e.failures.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn weights_from_csv(text: &str) -> Result<WeightTable, WeightsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| WeightsError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(WEIGHTS_HEADER) {
        return Err(WeightsError::Malformed {
            line: 1,
            message: format!("expected header {}", WEIGHTS_HEADER.join(",")),
        });
    }
    let mut table = WeightTable::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| WeightsError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| WeightsError::Malformed { line, message };
        if rec.len() != WEIGHTS_HEADER.len() {
            return Err(bad(format!("expected 6 fields, found {}", rec.len())));
        }
        let weight = |i: usize| -> Result<f64, WeightsError> {
            let v: f64 = rec[i]
                .trim()
                .parse()
                .map_err(|_| bad(format!("invalid number {}", &rec[i])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(WeightsError::OutOfRange { line, value: v });
            }
            Ok(v)
        };
        let count = |i: usize| -> Result<u64, WeightsError> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| bad(format!("invalid count {}", &rec[i])))
        };
        let entry = WeightEntry {
            w_pos: weight(2)?,
            w_neg: weight(3)?,
            successes: count(4)?,
            failures: count(5)?,
        };
        table
            .set(&rec[0], &rec[1], entry)
            .map_err(|e| bad(e.to_string()))?;
    }
    Ok(table)
}

pub fn save_weights(t: &WeightTable, path: &Path) -> Result<(), WeightsError> {
    fs::write(path, weights_to_csv(t)).map_err(io_err(path))
}

/// `Ok(None)` when the file does not exist.
pub fn load_weights_if_present(path: &Path) -> Result<Option<WeightTable>, WeightsError> {
    match fs::read_to_string(path) {
        Ok(text) => weights_from_csv(&text).map(Some),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// A missing file yields an empty table and logs a warning.
pub fn load_weights(path: &Path) -> Result<WeightTable, WeightsError> {
    match load_weights_if_present(path)? {
        Some(t) => Ok(t),
        None => {
            log::warn!("{}: no weights file, starting from zero", path.display());
            Ok(WeightTable::new())
        }
    }
}
