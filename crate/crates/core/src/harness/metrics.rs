//! Metrics files: CSV with a fixed header, and JSON.

use std::path::Path;

use serde::Serialize;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::simnet::MetricsRow;

pub const METRICS_HEADER: [&str; 6] = ["iteration", "loss", "acc", "flops", "delta", "retained_per_layer"];

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("metrics csv: {e}"))
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for r in rows {
        let retained = r.retained_per_layer.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            r.iteration.to_string(),
            r.loss.to_string(),
            r.acc.to_string(),
            r.flops.to_string(),
            r.delta.to_string(),
            retained,
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

pub fn metrics_from_csv(bytes: &[u8]) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Parse(format!("unexpected metrics header {header:?}")));
    }
    let field = |rec: &csv::StringRecord, i: usize| -> Result<String> {
        rec.get(i).map(str::to_string).ok_or_else(|| Error::Parse(format!("missing column {}", METRICS_HEADER[i])))
    };
    let num = |s: String, col: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse(format!("bad {col} value `{s}`")))
    };
    let int = |s: String, col: &str| -> Result<u64> {
        s.parse().map_err(|_| Error::Parse(format!("bad {col} value `{s}`")))
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let retained = field(&rec, 5)?;
            Ok(MetricsRow {
                iteration: int(field(&rec, 0)?, "iteration")?,
                loss: num(field(&rec, 1)?, "loss")?,
                acc: num(field(&rec, 2)?, "acc")?,
                flops: int(field(&rec, 3)?, "flops")?,
                delta: num(field(&rec, 4)?, "delta")?,
                retained_per_layer: if retained.is_empty() {
                    Vec::new()
                } else {
                    retained
                        .split(';')
                        .map(|v| int(v.to_string(), "retained_per_layer").map(|v| v as usize))
                        .collect::<Result<_>>()?
                },
                wall_time_ms: 0.0,
            })
        })
        .collect()
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_atomic(path, &metrics_to_csv(rows)?)?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    metrics_from_csv(&std::fs::read(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}
