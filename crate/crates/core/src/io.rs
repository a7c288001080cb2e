//! Small file-format helpers shared by the library and the CLI.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::coupling::LagRow;
use crate::error::Result;
use crate::transport::measure::csv_err;

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes a CSV with the given header; floats use Rust's shortest
/// round-trip formatting so output is byte-stable.
pub fn write_csv<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for r in rows {
        out.write_record(&r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), header, rows)
}

/// Per-lag table with columns `k, distance, stderr`.
pub fn write_lag_csv<W: Write>(w: W, rows: &[LagRow]) -> Result<()> {
    write_csv(
        w,
        &["k", "distance", "stderr"],
        rows.iter()
            .map(|r| vec![r.k.to_string(), r.distance.to_string(), r.stderr.to_string()]),
    )
}

/// Optimizer trace with columns `iteration, objective`.
pub fn write_trace_csv<W: Write>(w: W, objective: &[f64]) -> Result<()> {
    write_csv(
        w,
        &["iteration", "objective"],
        objective
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), v.to_string()]),
    )
}
