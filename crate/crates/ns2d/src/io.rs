//! Field snapshots and boundary traces on disk.
//!
//! A snapshot is `<stem>.bin` (little-endian `f64`: the `u` array row by
//! row, then `v`) with a `<stem>.json` header describing the grid and time.

use std::fs;
use std::path::{Path, PathBuf};

use ctrlmix_core::io::{write_csv_file, write_json};
use ctrlmix_core::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::grid::{MacField, SquareDomain};
use crate::noise::BoundaryTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotGrid {
    pub n: usize,
    pub h: f64,
    /// `[rows, cols]` of `u`: `n x (n+1)`, faces at `(i h, (j+1/2) h)`.
    pub u_shape: [usize; 2],
    /// `[rows, cols]` of `v`: `(n+1) x n`, faces at `((i+1/2) h, j h)`.
    pub v_shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub grid: SnapshotGrid,
    pub time: f64,
}

const FORMAT: &str = "mac-f64-le";

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

pub fn write_snapshot(stem: &Path, field: &MacField, time: f64) -> Result<()> {
    let n = field.n();
    let header = SnapshotHeader {
        format: FORMAT.into(),
        grid: SnapshotGrid {
            n,
            h: 1.0 / n as f64,
            u_shape: [n, n + 1],
            v_shape: [n + 1, n],
        },
        time,
    };
    let mut bytes = Vec::with_capacity(16 * n * (n + 1));
    for m in [&field.u, &field.v] {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                bytes.extend_from_slice(&m[(r, c)].to_le_bytes());
            }
        }
    }
    fs::write(with_ext(stem, "bin"), bytes)?;
    write_json(&with_ext(stem, "json"), &header)
}

pub fn read_snapshot(stem: &Path) -> Result<(SnapshotHeader, MacField)> {
    let header: SnapshotHeader = serde_json::from_slice(&fs::read(with_ext(stem, "json"))?)?;
    if header.format != FORMAT {
        return Err(Error::InvalidInput(format!(
            "unknown snapshot format {}",
            header.format
        )));
    }
    let bytes = fs::read(with_ext(stem, "bin"))?;
    let [ur, uc] = header.grid.u_shape;
    let [vr, vc] = header.grid.v_shape;
    if bytes.len() != 8 * (ur * uc + vr * vc) {
        return Err(Error::GridMismatch(format!(
            "snapshot holds {} bytes, header implies {}",
            bytes.len(),
            8 * (ur * uc + vr * vc)
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let u = DMatrix::from_row_slice(ur, uc, &vals[..ur * uc]);
    let v = DMatrix::from_row_slice(vr, vc, &vals[ur * uc..]);
    Ok((header, MacField { u, v }))
}

/// One row per time and boundary node: `t, s, v_n, v_tau`, with `v_n` the
/// normal velocity on the segment starting at arclength `s`.
pub fn write_boundary_trace(path: &Path, dom: &SquareDomain, trace: &BoundaryTrace) -> Result<()> {
    let rows = trace.times.iter().zip(&trace.data).flat_map(|(t, d)| {
        (0..dom.boundary_len()).map(move |k| {
            vec![
                t.to_string(),
                dom.node_s(k).to_string(),
                d.vn[k].to_string(),
                d.vt[k].to_string(),
            ]
        })
    });
    write_csv_file(path, &["t", "s", "v_n", "v_tau"], rows)
}
