//! Strang splitting for the coupled-channel Schrodinger equation on a periodic grid.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::grid::{FftPair, GridState, PeriodicGrid};
use crate::waveguide::{CouplingMatrix, TransverseBasis};
use crate::{Error, Result};

/// One Strang step `e^{-i dt V/2} e^{-i dt T} e^{-i dt V/2}`.
#[derive(Clone, Debug)]
pub struct SplitStep {
    grid: PeriodicGrid,
    dt: f64,
    channels: Vec<usize>,
    thresholds: Vec<f64>,
    kinetic: Vec<Vec<Complex64>>,
    /// Half-step potential propagators at the nodes where the coupling is non-zero.
    potential: Vec<(usize, DMatrix<Complex64>)>,
    /// Coupling restricted to the propagated channels, for energy diagnostics.
    coupling: Vec<(usize, DMatrix<f64>)>,
    fft: FftPair,
}

/// Channels reachable from `seed` through non-vanishing off-diagonal coupling.
pub fn coupled_channels(coupling: &CouplingMatrix, seed: &[usize], limit: usize) -> Vec<usize> {
    let n = coupling.channels().min(limit);
    let mut linked = vec![vec![false; n]; n];
    for j in 0..coupling.grid().len {
        for a in 0..n {
            for b in 0..n {
                if a != b && coupling.value(j, a, b) != 0.0 {
                    linked[a][b] = true;
                }
            }
        }
    }
    let mut active: Vec<usize> = seed.iter().cloned().filter(|&c| c < n).collect();
    let mut i = 0;
    while i < active.len() {
        let a = active[i];
        for b in 0..n {
            if linked[a][b] && !active.contains(&b) {
                active.push(b);
            }
        }
        i += 1;
    }
    active.sort_unstable();
    active
}

impl SplitStep {
    /// `coupling` must be sampled on the nodes of `grid`.
    pub fn new(
        coupling: &CouplingMatrix,
        basis: &TransverseBasis,
        grid: &PeriodicGrid,
        dt: f64,
        channels: &[usize],
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        // beyond dt * xi^2 = pi the kinetic phase wraps and splitting errors
        // from the potential step accumulate resonantly instead of cancelling
        let resonance = dt * grid.nyquist().powi(2);
        if resonance > std::f64::consts::PI {
            return Err(Error::InvalidArgument(format!(
                "time step {dt} is too large for grid step {}: dt * (pi/dx)^2 = {resonance:.3} exceeds pi",
                grid.step
            )));
        }
        let cg = coupling.grid();
        if cg.len < grid.len || (cg.start - grid.start).abs() > 1e-9 || (cg.step - grid.step).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "coupling is not sampled on the propagation grid".into(),
            ));
        }
        if channels.is_empty() || channels.iter().any(|&c| c >= coupling.channels()) {
            return Err(Error::InvalidArgument("invalid set of propagated channels".into()));
        }
        let na = channels.len();
        let thresholds: Vec<f64> = channels.iter().map(|&c| basis.threshold(c)).collect();
        let kinetic = thresholds
            .iter()
            .map(|nu| {
                (0..grid.len)
                    .map(|m| {
                        let xi = grid.momentum(m);
                        Complex64::from_polar(1.0, -dt * (xi * xi + nu))
                    })
                    .collect()
            })
            .collect();
        let mut potential = Vec::new();
        let mut restricted = Vec::new();
        for j in 0..grid.len {
            let v = DMatrix::from_fn(na, na, |a, b| coupling.value(j, channels[a], channels[b]));
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            let eig = SymmetricEigen::new(v.clone());
            let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            let phases = DMatrix::from_diagonal(
                &eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -0.5 * dt * e)),
            );
            potential.push((j, &q * phases * q.transpose()));
            restricted.push((j, v));
        }
        Ok(Self {
            grid: *grid,
            dt,
            channels: channels.to_vec(),
            thresholds,
            kinetic,
            potential,
            coupling: restricted,
            fft: FftPair::new(grid.len),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    fn check(&self, state: &GridState) -> Result<()> {
        if state.grid != self.grid || state.channels != self.channels {
            return Err(Error::InvalidArgument(
                "state and propagator use different grids or channels".into(),
            ));
        }
        Ok(())
    }

    fn half_potential(&self, state: &mut GridState) {
        let na = self.channels.len();
        let mut v = vec![Complex64::new(0.0, 0.0); na];
        for (j, u) in &self.potential {
            for a in 0..na {
                v[a] = state.amplitudes[a][*j];
            }
            for a in 0..na {
                let mut s = Complex64::new(0.0, 0.0);
                for b in 0..na {
                    s += u[(a, b)] * v[b];
                }
                state.amplitudes[a][*j] = s;
            }
        }
    }

    pub fn step(&self, state: &mut GridState) {
        let n = self.grid.len as f64;
        self.half_potential(state);
        for (amp, kin) in state.amplitudes.iter_mut().zip(&self.kinetic) {
            self.fft.forward.process(amp);
            for (z, k) in amp.iter_mut().zip(kin) {
                *z *= k / n;
            }
            self.fft.inverse.process(amp);
        }
        self.half_potential(state);
        state.time += self.dt;
    }

    /// `<psi, H psi>` for the propagated channels.
    pub fn energy(&self, state: &GridState) -> Result<f64> {
        self.check(state)?;
        let n = self.grid.len as f64;
        let mut e = 0.0;
        for (amp, nu) in state.amplitudes.iter().zip(&self.thresholds) {
            let mut a = amp.clone();
            self.fft.forward.process(&mut a);
            e += a
                .iter()
                .enumerate()
                .map(|(m, z)| {
                    let xi = self.grid.momentum(m);
                    (xi * xi + nu) * z.norm_sqr()
                })
                .sum::<f64>()
                * self.grid.step
                / n;
        }
        let na = self.channels.len();
        for (j, v) in &self.coupling {
            for a in 0..na {
                for b in 0..na {
                    e += (state.amplitudes[a][*j].conj() * v[(a, b)] * state.amplitudes[b][*j]).re * self.grid.step;
                }
            }
        }
        Ok(e)
    }
}

/// Diagnostics of a propagation run.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct PropagationReport {
    pub steps: usize,
    pub norm_drift: f64,
    pub max_edge_probability: f64,
}

/// Integrator tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationLimits {
    pub norm_tolerance: f64,
    pub leak_tolerance: f64,
}

impl Default for PropagationLimits {
    fn default() -> Self {
        Self {
            norm_tolerance: 1e-10,
            leak_tolerance: 1e-10,
        }
    }
}

/// Propagates `state` by `steps` Strang steps, calling `observer` after each one.
/// The observer may stop the run early by returning `false`.
pub fn full_propagate<F>(
    state: &mut GridState,
    propagator: &SplitStep,
    steps: usize,
    limits: &PropagationLimits,
    mut observer: F,
) -> Result<PropagationReport>
where
    F: FnMut(&GridState) -> bool,
{
    propagator.check(state)?;
    let norm0 = state.norm_sqr();
    let mut max_edge: f64 = 0.0;
    let mut taken = 0;
    for _ in 0..steps {
        propagator.step(state);
        taken += 1;
        let edge = state.edge_probability(0.05);
        max_edge = max_edge.max(edge);
        if edge > limits.leak_tolerance {
            return Err(Error::DomainTooSmall(format!(
                "probability {edge:.3e} reached the outer 5% of the grid at t = {}",
                state.time
            )));
        }
        if !observer(state) {
            break;
        }
    }
    let drift = (state.norm_sqr() - norm0).abs();
    if drift > limits.norm_tolerance {
        return Err(Error::IntegratorFailure(format!(
            "norm drifted by {drift:.3e} over {taken} steps"
        )));
    }
    Ok(PropagationReport {
        steps: taken,
        norm_drift: drift,
        max_edge_probability: max_edge,
    })
}
