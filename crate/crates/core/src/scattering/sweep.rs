use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::smatrix::SMatrix;
use super::solver::{solve_smatrix, SolverOptions};
use crate::exec::{try_map_range, Execution};
use crate::numerics::interp::lagrange_weights;
use crate::waveguide::{CouplingMatrix, TransverseBasis};
use crate::{Error, Result};

/// Uniform energy grid `start + i * step`, `i < len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl EnergyGrid {
    /// `len` equally spaced points from `start` to `end` inclusive.
    pub fn spanning(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 2 || !(end > start) {
            return Err(Error::InvalidArgument(format!(
                "energy grid needs at least two points on a non-empty range, got {len} on [{start}, {end}]"
            )));
        }
        Ok(Self {
            start,
            step: (end - start) / (len - 1) as f64,
            len,
        })
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.point(i))
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let slack = 1e-9 * self.step;
        lo >= self.start - slack && hi <= self.end() + slack
    }
}

/// Scattering matrices on a uniform grid inside one inter-threshold interval.
#[derive(Clone, Debug)]
pub struct SweepSegment {
    pub grid: EnergyGrid,
    pub matrices: Vec<SMatrix>,
}

impl SweepSegment {
    pub fn open_count(&self) -> usize {
        self.matrices[0].open_count()
    }

    /// Entrywise Lagrange interpolation of `S` at `energy`.
    pub fn interpolate(&self, energy: f64, points: usize) -> Option<DMatrix<Complex64>> {
        interpolate_matrices(&self.grid, self.matrices.iter().map(|s| s.matrix()), energy, points)
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.matrices.iter().map(|s| s.unitarity_residual()).fold(0.0, f64::max)
    }

    pub fn max_reciprocity_residual(&self) -> f64 {
        self.matrices.iter().map(|s| s.reciprocity_residual()).fold(0.0, f64::max)
    }

    /// Largest jump `||S_{j+1} - S_j||` between neighbouring grid points.
    pub fn max_jump(&self) -> f64 {
        self.matrices
            .windows(2)
            .map(|w| (w[1].matrix() - w[0].matrix()).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn interpolate_matrices<'a>(
    grid: &EnergyGrid,
    mut matrices: impl Iterator<Item = &'a DMatrix<Complex64>> + Clone,
    energy: f64,
    points: usize,
) -> Option<DMatrix<Complex64>> {
    let (first, w) = lagrange_weights(grid.start, grid.step, grid.len, energy, points)?;
    let proto = matrices.clone().next()?;
    let mut out = DMatrix::<Complex64>::zeros(proto.nrows(), proto.ncols());
    let mut it = matrices.by_ref().skip(first);
    for wk in w {
        out += it.next()? * Complex64::new(wk, 0.0);
    }
    Some(out)
}

/// Scattering matrices over an energy range, one segment per inter-threshold interval.
#[derive(Clone, Debug)]
pub struct SMatrixSweep {
    pub segments: Vec<SweepSegment>,
}

impl SMatrixSweep {
    /// The segment whose grid covers `[lo, hi]`.
    pub fn segment_covering(&self, lo: f64, hi: f64) -> Option<&SweepSegment> {
        self.segments.iter().find(|s| s.grid.covers(lo, hi))
    }

    pub fn iter(&self) -> impl Iterator<Item = &SMatrix> {
        self.segments.iter().flat_map(|s| s.matrices.iter())
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.segments.iter().map(|s| s.max_unitarity_residual()).fold(0.0, f64::max)
    }

    pub fn max_reciprocity_residual(&self) -> f64 {
        self.segments.iter().map(|s| s.max_reciprocity_residual()).fold(0.0, f64::max)
    }
}

/// Solves on every point of `grid`, which must lie inside one inter-threshold interval.
pub fn sweep_on_grid(
    coupling: &CouplingMatrix,
    basis: &TransverseBasis,
    grid: EnergyGrid,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<SweepSegment> {
    if basis.interval_of(grid.start) != basis.interval_of(grid.end()) {
        return Err(Error::InvalidArgument(format!(
            "energy grid [{}, {}] crosses a threshold",
            grid.start,
            grid.end()
        )));
    }
    let matrices = try_map_range(grid.len, exec, |i| solve_smatrix(coupling, basis, grid.point(i), opts))?;
    Ok(SweepSegment { grid, matrices })
}

/// Sweeps `[lambda_min, lambda_max]` with about `points` energies in total,
/// split at thresholds. Each segment keeps a margin of twice the threshold
/// window from the thresholds and receives at least five points.
pub fn compute_sweep(
    coupling: &CouplingMatrix,
    basis: &TransverseBasis,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<SMatrixSweep> {
    if !(lambda_max > lambda_min) {
        return Err(Error::InvalidArgument(format!(
            "empty energy range [{lambda_min}, {lambda_max}]"
        )));
    }
    let window = opts.threshold_window.unwrap_or_else(|| basis.default_threshold_window());
    let margin = 2.0 * window;
    let mut pieces = Vec::new();
    let mut lo = lambda_min.max(basis.threshold(0) + margin);
    for &t in basis.thresholds() {
        if t <= lo {
            if t > lo - margin {
                lo = t + margin;
            }
            continue;
        }
        if t >= lambda_max + margin {
            break;
        }
        let hi = (t - margin).min(lambda_max);
        if hi > lo {
            pieces.push((lo, hi));
        }
        lo = t + margin;
    }
    if lo < lambda_max {
        pieces.push((lo, lambda_max));
    }
    if pieces.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "energy range [{lambda_min}, {lambda_max}] contains no scattering energies"
        )));
    }
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    let segments = pieces
        .into_iter()
        .map(|(a, b)| {
            let share = ((points as f64) * (b - a) / total).round() as usize;
            let grid = EnergyGrid::spanning(a, b, share.max(5))?;
            sweep_on_grid(coupling, basis, grid, opts, exec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SMatrixSweep { segments })
}

/// The 2x2 block from incoming channel `from` to outgoing channel `to` at every
/// sweep energy; zero where either channel is closed.
pub fn partial_smatrix(sweep: &SMatrixSweep, from: usize, to: usize) -> Vec<(f64, Matrix2<Complex64>)> {
    sweep
        .iter()
        .map(|s| {
            let block = if from < s.open_count() && to < s.open_count() {
                s.block(to, from)
            } else {
                Matrix2::zeros()
            };
            (s.energy(), block)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveguide::{compute_coupling, PotentialSpec, XGrid};
    use std::f64::consts::PI;

    #[test]
    fn splits_at_thresholds() {
        let basis = TransverseBasis::new(PI / 2.0, 8).unwrap();
        let c = compute_coupling(&PotentialSpec::Zero, &basis, &XGrid::symmetric(2.0, 0.1).unwrap(), 8).unwrap();
        let sw = compute_sweep(&c, &basis, 5.0, 30.0, 50, &SolverOptions::default(), Execution::Sequential).unwrap();
        assert_eq!(sw.segments.len(), 2);
        assert_eq!(sw.segments[0].open_count(), 1);
        assert_eq!(sw.segments[1].open_count(), 2);
        assert!(sw.segments[0].grid.end() < 16.0 && sw.segments[1].grid.start > 16.0);
        let blocks = partial_smatrix(&sw, 1, 0);
        assert_eq!(blocks.len(), sw.iter().count());
        assert!(blocks.iter().all(|(_, b)| b.norm() == 0.0));
    }
}
