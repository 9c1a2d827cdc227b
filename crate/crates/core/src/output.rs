//! CSV and JSON writers. Files are written to a temporary sibling and renamed
//! into place, so readers never observe a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::scattering::{Direction, EwDelayMatrix, SMatrixSweep};
use crate::spectral::FiberVector;
use crate::timedomain::SojournRecord;
use crate::waveguide::CouplingMatrix;
use crate::{Error, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes `rows` under `header`; floats use the shortest round-trip form.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub const MATRIX_HEADER: [&str; 5] = ["lambda", "row", "col", "re", "im"];

/// `(lambda, row, col, Re, Im)` for every entry of every sweep matrix.
/// Row and column are zero-based fiber indices `2 * channel + direction`.
pub fn smatrix_rows(sweep: &SMatrixSweep) -> Vec<(f64, usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for s in sweep.iter() {
        let m = s.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push((s.energy(), i, j, m[(i, j)].re, m[(i, j)].im));
            }
        }
    }
    out
}

pub fn delay_rows(delay: &EwDelayMatrix) -> Vec<(f64, usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for seg in &delay.segments {
        for (k, tau) in seg.tau.iter().enumerate() {
            let e = seg.grid.point(k);
            for i in 0..tau.nrows() {
                for j in 0..tau.ncols() {
                    out.push((e, i, j, tau[(i, j)].re, tau[(i, j)].im));
                }
            }
        }
    }
    out
}

pub const RESIDUAL_HEADER: [&str; 6] = [
    "lambda",
    "open_channels",
    "unitarity_residual",
    "reciprocity_residual",
    "hermiticity_residual",
    "stencil_truncation",
];

/// Per-energy diagnostics; assumes `delay` was computed from `sweep`.
pub fn residual_rows(sweep: &SMatrixSweep, delay: &EwDelayMatrix) -> Vec<(f64, usize, f64, f64, f64, f64)> {
    let mut out = Vec::new();
    for (seg, dseg) in sweep.segments.iter().zip(&delay.segments) {
        for (k, s) in seg.matrices.iter().enumerate() {
            out.push((
                s.energy(),
                s.open_count(),
                s.unitarity_residual(),
                s.reciprocity_residual(),
                dseg.hermiticity_residual[k],
                dseg.truncation_estimate[k],
            ));
        }
    }
    out
}

pub const COUPLING_HEADER: [&str; 4] = ["x", "alpha", "beta", "value"];

/// `(x_j, alpha, beta, V_{alpha beta}(x_j))` with one-based channel labels.
pub fn coupling_rows(coupling: &CouplingMatrix) -> Vec<(f64, usize, usize, f64)> {
    let g = coupling.grid();
    let n = coupling.channels();
    let mut out = Vec::with_capacity(g.len * n * n);
    for j in 0..g.len {
        for a in 0..n {
            for b in 0..n {
                out.push((g.point(j), a + 1, b + 1, coupling.value(j, a, b)));
            }
        }
    }
    out
}

pub const FIBER_HEADER: [&str; 5] = ["lambda", "alpha", "direction", "re", "im"];

pub fn fiber_rows(fiber: &FiberVector) -> Vec<(f64, usize, &'static str, f64, f64)> {
    let g = fiber.grid();
    let mut out = Vec::new();
    for i in 0..g.len {
        for a in 0..fiber.open_count() {
            for (d, label) in [(Direction::Left, "left"), (Direction::Right, "right")] {
                let z = fiber.value(i, a, d);
                out.push((g.point(i), a + 1, label, z.re, z.im));
            }
        }
    }
    out
}

pub const SOJOURN_HEADER: [&str; 6] = ["r", "T_r", "T0_phi", "T0_S_phi", "tau_r", "tau_free"];

pub fn sojourn_rows(rec: &SojournRecord) -> Vec<(f64, f64, f64, f64, f64, f64)> {
    (0..rec.radii.len())
        .map(|i| {
            (
                rec.radii[i],
                rec.full[i],
                rec.free_incoming[i],
                rec.free_scattered[i],
                rec.delay[i],
                rec.free_delay[i],
            )
        })
        .collect()
}

/// Header `t, P_r1, P_r2, ...` and rows of the occupation trace.
pub fn trace_table(rec: &SojournRecord) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut header = vec!["t".to_string()];
    header.extend(rec.radii.iter().map(|r| format!("P_{r}")));
    let rows = rec
        .run
        .trace
        .iter()
        .map(|(t, p)| std::iter::once(*t).chain(p.iter().copied()).collect())
        .collect();
    (header, rows)
}
