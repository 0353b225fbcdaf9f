use std::path::Path;

use super::RoundLog;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "round",
    "mode",
    "global_accuracy",
    "avg_accuracy",
    "mean_divergence",
    "max_divergence",
    "selected_clients",
    "wallclock_ms",
];

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub mode: String,
    pub global_accuracy: f64,
    pub avg_accuracy: f64,
    pub mean_divergence: f64,
    pub max_divergence: f64,
    pub selected_clients: Vec<usize>,
    pub wallclock_ms: u64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            msg: format!("{other:?}"),
        },
    }
}

/// Write `logs` as CSV (LF line endings, 6-decimal floats).
pub fn write_round_logs(logs: &[RoundLog], mode: &str, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for log in logs {
        let selected = log
            .selected_clients
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            log.round.to_string(),
            mode.to_string(),
            format!("{:.6}", log.global_accuracy),
            format!("{:.6}", log.avg_accuracy),
            format!("{:.6}", log.mean_divergence()),
            format!("{:.6}", log.max_divergence()),
            selected,
            log.wallclock_ms.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parse a CSV written by [`write_round_logs`], checking the header.
pub fn read_round_records(path: &Path) -> Result<Vec<RoundRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(found) if found == *expected => {}
            found => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    msg: format!(
                        "column {} should be `{expected}`, found {}",
                        i + 1,
                        found.map_or("nothing".to_string(), |f| format!("`{f}`"))
                    ),
                })
            }
        }
    }
    if header.len() != CSV_HEADER.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("unexpected extra column `{}`", &header[CSV_HEADER.len()]),
        });
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line + 2;
        let field = |i: usize| -> &str { rec.get(i).unwrap_or("") };
        let bad = |col: &str, v: &str| Error::Format {
            path: path.to_path_buf(),
            msg: format!("line {line}: column `{col}` has invalid value `{v}`"),
        };
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| bad(CSV_HEADER[i], field(i)))
        };
        let selected = if field(6).is_empty() {
            Vec::new()
        } else {
            field(6)
                .split(';')
                .map(|s| s.parse::<usize>().map_err(|_| bad(CSV_HEADER[6], field(6))))
                .collect::<Result<_>>()?
        };
        out.push(RoundRecord {
            round: field(0).parse().map_err(|_| bad(CSV_HEADER[0], field(0)))?,
            mode: field(1).to_string(),
            global_accuracy: num(2)?,
            avg_accuracy: num(3)?,
            mean_divergence: num(4)?,
            max_divergence: num(5)?,
            selected_clients: selected,
            wallclock_ms: field(7).parse().map_err(|_| bad(CSV_HEADER[7], field(7)))?,
        });
    }
    Ok(out)
}
