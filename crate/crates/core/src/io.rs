//! File formats: interaction logs (CSV or JSONL), weight vectors and
//! timeline series.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{InteractionEvent, InteractionLog, Timestamp};
use crate::error::{Error, Result};
use crate::eval::EvalResult;
use crate::prob::WeightVector;

pub const LOG_HEADER: [&str; 3] = ["user_id", "item_id", "timestamp"];
pub const WEIGHTS_HEADER: [&str; 2] = ["item_id", "weight"];
pub const TIMELINE_HEADER: [&str; 4] = ["time", "score", "std_error", "pairs"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(path: &str, line: u64, message: impl ToString) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.to_string(),
    }
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_string(),
            source,
        },
        csv::ErrorKind::Deserialize { err, .. } => parse_err(path, line, err),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

fn check_header(path: &str, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

/// Read a log, choosing JSONL for `.jsonl`/`.ndjson` files and CSV otherwise.
pub fn read_log(path: &Path) -> Result<InteractionLog> {
    let name = path.display().to_string();
    let file = open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => read_log_jsonl(BufReader::new(file), &name),
        _ => read_log_csv(file, &name),
    }
}

/// CSV with header `user_id,item_id,timestamp`. `source` names the input in
/// error messages.
pub fn read_log_csv<R: Read>(reader: R, source: &str) -> Result<InteractionLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    check_header(source, &header, &LOG_HEADER)?;
    let mut log = InteractionLog::new();
    for row in rdr.deserialize::<InteractionEvent>() {
        log.push(row.map_err(|e| csv_err(source, e))?);
    }
    Ok(log)
}

/// One JSON object per line with fields `user_id`, `item_id`, `timestamp`.
/// Blank lines are skipped.
pub fn read_log_jsonl<R: BufRead>(reader: R, source: &str) -> Result<InteractionLog> {
    let mut log = InteractionLog::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: source.to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event: InteractionEvent =
            serde_json::from_str(&line).map_err(|e| parse_err(source, k as u64 + 1, e))?;
        log.push(event);
    }
    Ok(log)
}

pub fn write_log_csv<W: Write>(writer: W, log: &InteractionLog) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for e in log.events() {
        wtr.serialize(e).map_err(|e| csv_err("<output>", e))?;
    }
    if log.is_empty() {
        wtr.write_record(LOG_HEADER)
            .map_err(|e| csv_err("<output>", e))?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}

pub fn write_log(path: &Path, log: &InteractionLog) -> Result<()> {
    write_log_csv(create(path)?, log)
}

/// Weights as `item_id,weight` rows, 17 significant digits each.
pub fn write_weights_csv<W: Write>(writer: W, weights: &WeightVector<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e| csv_err("<output>", e);
    wtr.write_record(WEIGHTS_HEADER).map_err(io)?;
    for (item, w) in weights.iter() {
        wtr.write_record([item, &format!("{w:.16e}")]).map_err(io)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}

pub fn write_weights(path: &Path, weights: &WeightVector<f64>) -> Result<()> {
    write_weights_csv(create(path)?, weights)
}

pub fn read_weights_csv<R: Read>(reader: R, source: &str) -> Result<WeightVector<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    check_header(source, &header, &WEIGHTS_HEADER)?;
    let mut weights = WeightVector::identity();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 2 {
            return Err(parse_err(source, line, "expected 2 fields"));
        }
        let w: f64 = row[1]
            .parse()
            .map_err(|e| parse_err(source, line, format!("bad weight `{}`: {e}", &row[1])))?;
        weights
            .set(&row[0], w)
            .map_err(|e| parse_err(source, line, e))?;
    }
    Ok(weights)
}

pub fn read_weights(path: &Path) -> Result<WeightVector<f64>> {
    read_weights_csv(open(path)?, &path.display().to_string())
}

/// One row of a timeline series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub time: Timestamp,
    pub score: f64,
    pub std_error: f64,
    pub pairs: u64,
}

impl From<&(Timestamp, EvalResult<f64>)> for TimelineRow {
    fn from((time, r): &(Timestamp, EvalResult<f64>)) -> Self {
        TimelineRow {
            time: *time,
            score: r.score,
            std_error: r.std_error,
            pairs: r.pairs_evaluated,
        }
    }
}

pub fn write_timeline_csv<W: Write>(writer: W, rows: &[TimelineRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e| csv_err("<output>", e);
    wtr.write_record(TIMELINE_HEADER).map_err(io)?;
    for r in rows {
        wtr.write_record([
            r.time.to_string(),
            r.score.to_string(),
            r.std_error.to_string(),
            r.pairs.to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}

pub fn write_timeline(path: &Path, rows: &[TimelineRow]) -> Result<()> {
    write_timeline_csv(create(path)?, rows)
}

pub fn read_timeline_csv<R: Read>(reader: R, source: &str) -> Result<Vec<TimelineRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    check_header(source, &header, &TIMELINE_HEADER)?;
    rdr.deserialize()
        .map(|row| row.map_err(|e| csv_err(source, e)))
        .collect()
}

pub fn read_timeline(path: &Path) -> Result<Vec<TimelineRow>> {
    read_timeline_csv(open(path)?, &path.display().to_string())
}
