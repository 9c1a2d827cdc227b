use nalgebra::DMatrix;
use num_complex::Complex64;

use super::sweep::{interpolate_matrices, EnergyGrid, SMatrixSweep};
use crate::numerics::diff::{stencil_at, Stencil};
use crate::{Error, Result};

/// Eisenbud-Wigner delay `-i S* dS/dlambda` on one sweep segment.
#[derive(Clone, Debug)]
pub struct DelaySegment {
    pub grid: EnergyGrid,
    /// Hermitian part of the delay matrix at each grid energy.
    pub tau: Vec<DMatrix<Complex64>>,
    /// `dS/dlambda` at each grid energy.
    pub derivative: Vec<DMatrix<Complex64>>,
    /// `||tau - tau*||` before symmetrisation.
    pub hermiticity_residual: Vec<f64>,
    /// Estimated truncation error of the difference stencil.
    pub truncation_estimate: Vec<f64>,
}

impl DelaySegment {
    pub fn tau_at(&self, energy: f64, points: usize) -> Option<DMatrix<Complex64>> {
        interpolate_matrices(&self.grid, self.tau.iter(), energy, points)
    }

    pub fn derivative_at(&self, energy: f64, points: usize) -> Option<DMatrix<Complex64>> {
        interpolate_matrices(&self.grid, self.derivative.iter(), energy, points)
    }

    pub fn max_hermiticity_residual(&self) -> f64 {
        self.hermiticity_residual.iter().cloned().fold(0.0, f64::max)
    }
}

/// Delay matrices for every segment of a sweep.
#[derive(Clone, Debug)]
pub struct EwDelayMatrix {
    pub stencil: Stencil,
    pub segments: Vec<DelaySegment>,
}

impl EwDelayMatrix {
    pub fn segment_covering(&self, lo: f64, hi: f64) -> Option<&DelaySegment> {
        self.segments.iter().find(|s| s.grid.covers(lo, hi))
    }

    pub fn max_hermiticity_residual(&self) -> f64 {
        self.segments.iter().map(|s| s.max_hermiticity_residual()).fold(0.0, f64::max)
    }
}

fn differentiate(values: &[&DMatrix<Complex64>], h: f64, order: usize) -> Option<Vec<DMatrix<Complex64>>> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (first, w) = stencil_at(i, n, order, h)?;
            let mut d = DMatrix::<Complex64>::zeros(values[0].nrows(), values[0].ncols());
            for (k, wk) in w.iter().enumerate() {
                d += values[first + k] * Complex64::new(*wk, 0.0);
            }
            Some(d)
        })
        .collect()
}

/// Computes the delay matrix by finite differences of the sweep.
pub fn ew_delay(sweep: &SMatrixSweep, stencil: Stencil) -> Result<EwDelayMatrix> {
    let order = stencil.order();
    let segments = sweep
        .segments
        .iter()
        .map(|seg| {
            let n = seg.grid.len;
            let needed = (order + 3).max(5);
            if n < needed {
                return Err(Error::Stencil(format!(
                    "segment [{}, {}] has {n} points; order {order} differences need {needed}",
                    seg.grid.start,
                    seg.grid.end()
                )));
            }
            let h = seg.grid.step;
            let s: Vec<&DMatrix<Complex64>> = seg.matrices.iter().map(|m| m.matrix()).collect();
            let d = differentiate(&s, h, order).expect("enough points");
            let finer = differentiate(&s, h, order + 2).expect("enough points");
            let unitarity = seg.max_unitarity_residual();
            let mut tau = Vec::with_capacity(n);
            let mut herm = Vec::with_capacity(n);
            let mut trunc = Vec::with_capacity(n);
            for i in 0..n {
                let raw = (s[i].adjoint() * &d[i]) * -Complex64::i();
                let anti = &raw - raw.adjoint();
                let residual = anti.norm();
                let estimate = 2.0 * (&d[i] - &finer[i]).norm();
                let floor = 4.0 * unitarity / h + 1e-12 * d[i].norm().max(1.0);
                if residual > 10.0 * (estimate + floor) {
                    return Err(Error::AccuracyFailure(format!(
                        "delay matrix at energy {} has hermiticity residual {residual:.3e}, \
                         expected at most {:.3e}",
                        seg.grid.point(i),
                        10.0 * (estimate + floor)
                    )));
                }
                tau.push((&raw + raw.adjoint()) * Complex64::new(0.5, 0.0));
                herm.push(residual);
                trunc.push(estimate);
            }
            Ok(DelaySegment {
                grid: seg.grid,
                tau,
                derivative: d,
                hermiticity_residual: herm,
                truncation_estimate: trunc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EwDelayMatrix { stencil, segments })
}
