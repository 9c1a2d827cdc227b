//! Exact multichannel solver: the coupled-channel equations are integrated
//! across the interaction region with a fourth-order Magnus propagator and
//! matched to free channel waves on both sides.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::smatrix::{Direction, SMatrix};
use crate::waveguide::{open_channels, CouplingMatrix, OpenChannels, TransverseBasis};
use crate::{Error, Result};

/// Tunable parameters of [`solve_smatrix`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Closed channels kept in the expansion; doubled if unitarity fails.
    pub closed_channels: usize,
    pub condition_limit: f64,
    /// Accepted `||S*S - I||`; the solve fails above ten times this value.
    pub unitarity_tolerance: f64,
    /// Exclusion half-width around thresholds; `None` uses the basis default.
    pub threshold_window: Option<f64>,
    /// Relative level below which the coupling counts as vanished.
    pub decay_cutoff: f64,
    /// Cells between re-orthonormalisations of the propagated solutions.
    pub reorthonormalize_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            closed_channels: 4,
            condition_limit: 1e12,
            unitarity_tolerance: 1e-6,
            threshold_window: None,
            decay_cutoff: 1e-12,
            reorthonormalize_every: 8,
        }
    }
}

/// Scattering matrix at `energy` for the given channel coupling.
pub fn solve_smatrix(
    coupling: &CouplingMatrix,
    basis: &TransverseBasis,
    energy: f64,
    opts: &SolverOptions,
) -> Result<SMatrix> {
    let window = opts.threshold_window.unwrap_or_else(|| basis.default_threshold_window());
    let open = open_channels(energy, basis, window)?;
    if coupling.is_zero() {
        return Ok(SMatrix::identity(energy, open.momenta));
    }
    let available = coupling.channels().min(basis.mode_count());
    let mut closed = opts.closed_channels;
    if open.count() + closed > available {
        return Err(Error::InvalidArgument(format!(
            "energy {energy} has {} open channels; {} closed channels are requested but the expansion holds only {available} modes",
            open.count(),
            closed
        )));
    }
    loop {
        let s = solve_truncated(coupling, basis, &open, open.count() + closed, opts)?;
        let residual = s.unitarity_residual();
        if residual <= 10.0 * opts.unitarity_tolerance {
            return Ok(s);
        }
        let next = (2 * closed).max(closed + 1);
        if open.count() + next <= available {
            closed = next;
            continue;
        }
        return Err(Error::AccuracyFailure(format!(
            "unitarity residual {residual:.3e} at energy {energy} with {closed} closed channels"
        )));
    }
}

fn cell_boundaries(coupling: &CouplingMatrix, radius: f64) -> Vec<f64> {
    let h = coupling.grid().step;
    let m = (2.0 * radius / h).round() as usize;
    let mut pts: Vec<f64> = (0..=m).map(|i| -radius + i as f64 * h).collect();
    for &e in coupling.edges() {
        if e > -radius && e < radius && pts.iter().all(|p| (p - e).abs() > 1e-10 * h) {
            pts.push(e);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts
}

/// Backward propagator `exp(-Omega)` over one cell for `psi'' = W(x) psi`.
fn cell_propagator(w1: &DMatrix<f64>, w2: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = w1.nrows();
    let c = 3f64.sqrt() / 12.0 * h * h;
    let mut omega = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for a in 0..n {
        omega[(a, n + a)] = h;
    }
    for a in 0..n {
        for b in 0..n {
            let d = w1[(a, b)] - w2[(a, b)];
            omega[(n + a, b)] = 0.5 * h * (w1[(a, b)] + w2[(a, b)]);
            omega[(a, b)] = c * d;
            omega[(n + a, n + b)] = -c * d;
        }
    }
    (-omega).exp()
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn solve_truncated(
    coupling: &CouplingMatrix,
    basis: &TransverseBasis,
    open: &OpenChannels,
    n: usize,
    opts: &SolverOptions,
) -> Result<SMatrix> {
    let energy = open.energy;
    let no = open.count();
    let nc = n - no;
    let k = &open.momenta;
    let kappa: Vec<f64> = (no..n).map(|c| (basis.threshold(c) - energy).sqrt()).collect();
    let radius = coupling.matching_radius(opts.decay_cutoff)?;
    let pts = cell_boundaries(coupling, radius);

    let w_at = |x: f64| {
        let v = coupling.eval(x);
        let mut w = v.view((0, 0), (n, n)).into_owned();
        for a in 0..n {
            w[(a, a)] += basis.threshold(a) - energy;
        }
        w
    };

    let i = Complex64::i();
    let wave = |kk: f64, x: f64, sign: f64| (i * sign * kk * x).exp() / kk.sqrt();

    // Solutions regular at +inf, as columns [closed | outgoing right | incoming right].
    let m = nc + 2 * no;
    let mut y = DMatrix::<Complex64>::zeros(2 * n, m);
    for (j, &kc) in kappa.iter().enumerate() {
        y[(no + j, j)] = Complex64::new(1.0, 0.0);
        y[(n + no + j, j)] = Complex64::new(-kc, 0.0);
    }
    for a in 0..no {
        for (col, sign) in [(nc + a, 1.0), (nc + no + a, -1.0)] {
            let f = wave(k[a], radius, sign);
            y[(a, col)] = f;
            y[(n + a, col)] = i * sign * k[a] * f;
        }
    }

    // right-hand open amplitudes = track * (open coefficients of the current basis)
    let mut track = DMatrix::<Complex64>::identity(2 * no, 2 * no);
    let orthonormalize = |y: &mut DMatrix<Complex64>, track: &mut DMatrix<Complex64>| -> Result<()> {
        let qr = y.clone().qr();
        let r = qr.r();
        let roo = r.view((nc, nc), (2 * no, 2 * no)).into_owned();
        let inv = roo.try_inverse().ok_or(Error::SolverFailure {
            energy,
            condition: f64::INFINITY,
            limit: opts.condition_limit,
        })?;
        *track = &*track * inv;
        *y = qr.q();
        Ok(())
    };

    let g = 3f64.sqrt() / 6.0;
    let every = opts.reorthonormalize_every.max(1);
    for (count, cell) in pts.windows(2).rev().enumerate() {
        let (a, b) = (cell[0], cell[1]);
        let h = b - a;
        let mid = 0.5 * (a + b);
        let p = cell_propagator(&w_at(mid - g * h), &w_at(mid + g * h), h);
        y = to_complex(&p) * y;
        if (count + 1) % every == 0 {
            orthonormalize(&mut y, &mut track)?;
        }
    }
    orthonormalize(&mut y, &mut track)?;

    // Free waves at -R: [incoming left-side | outgoing left-side | closed].
    let size = 2 * n + 2 * no;
    let mut sys = DMatrix::<Complex64>::zeros(size, size);
    sys.view_mut((0, 0), (2 * n, m)).copy_from(&y);
    for a in 0..no {
        for (col, sign) in [(m + a, 1.0), (m + no + a, -1.0)] {
            let f = wave(k[a], -radius, sign);
            sys[(a, col)] = -f;
            sys[(n + a, col)] = -(i * sign * k[a] * f);
        }
    }
    for (j, &kc) in kappa.iter().enumerate() {
        let col = m + 2 * no + j;
        let norm = (1.0 + kc * kc).sqrt();
        sys[(no + j, col)] = Complex64::new(-1.0 / norm, 0.0);
        sys[(n + no + j, col)] = Complex64::new(-kc / norm, 0.0);
    }
    for a in 0..no {
        sys[(2 * n + a, m + a)] = Complex64::new(1.0, 0.0);
        for j in 0..2 * no {
            sys[(2 * n + no + a, nc + j)] = track[(no + a, j)];
        }
    }

    let sv = sys.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= opts.condition_limit) {
        return Err(Error::SolverFailure {
            energy,
            condition,
            limit: opts.condition_limit,
        });
    }

    let mut rhs = DMatrix::<Complex64>::zeros(size, 2 * no);
    for a in 0..no {
        rhs[(2 * n + a, SMatrix::index(a, Direction::Right))] = Complex64::new(1.0, 0.0);
        rhs[(2 * n + no + a, SMatrix::index(a, Direction::Left))] = Complex64::new(1.0, 0.0);
    }
    let sol = sys.lu().solve(&rhs).ok_or(Error::SolverFailure {
        energy,
        condition: f64::INFINITY,
        limit: opts.condition_limit,
    })?;

    let right = &track * sol.view((nc, 0), (2 * no, 2 * no));
    let mut s = DMatrix::<Complex64>::zeros(2 * no, 2 * no);
    for col in 0..2 * no {
        for b in 0..no {
            s[(SMatrix::index(b, Direction::Right), col)] = right[(b, col)];
            s[(SMatrix::index(b, Direction::Left), col)] = sol[(m + no + b, col)];
        }
    }
    Ok(SMatrix::new(energy, k.clone(), s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{square_well_1d, SquareWell};
    use crate::waveguide::{
        compute_coupling, LongitudinalProfile, PotentialSpec, SeparableTerm, TransverseProfile, XGrid,
    };
    use std::f64::consts::PI;

    fn well(depth: f64, half_width: f64) -> PotentialSpec {
        PotentialSpec::Separable(SeparableTerm {
            transverse: TransverseProfile::Constant { value: 1.0 },
            longitudinal: LongitudinalProfile::Box { amplitude: -depth, half_width, center: 0.0 },
        })
    }

    #[test]
    fn free_guide_gives_identity() {
        let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
        let c = compute_coupling(&PotentialSpec::Zero, &basis, &XGrid::symmetric(5.0, 0.05).unwrap(), 16).unwrap();
        let s = solve_smatrix(&c, &basis, 20.0, &SolverOptions::default()).unwrap();
        assert_eq!(s.matrix(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn square_well_matches_closed_form() {
        let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
        let c = compute_coupling(&well(4.0, 1.0), &basis, &XGrid::symmetric(4.0, 0.05).unwrap(), 64).unwrap();
        let sw = SquareWell { depth: 4.0, half_width: 1.0 };
        for energy in [4.5, 7.0, 11.3, 15.0] {
            let s = solve_smatrix(&c, &basis, energy, &SolverOptions::default()).unwrap();
            let o = square_well_1d(&sw, (energy - 4.0).sqrt());
            assert!((s.transmission(0, 0) - o.transmission).norm() < 1e-10, "t at {energy}");
            assert!((s.reflection(0, 0) - o.reflection).norm() < 1e-10, "r at {energy}");
            assert!(s.unitarity_residual() < 1e-10);
        }
    }

    #[test]
    fn threshold_energy_is_rejected() {
        let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
        let c = compute_coupling(&well(4.0, 1.0), &basis, &XGrid::symmetric(4.0, 0.05).unwrap(), 64).unwrap();
        assert!(matches!(
            solve_smatrix(&c, &basis, 16.0, &SolverOptions::default()),
            Err(Error::ThresholdProximity { .. })
        ));
    }
}
