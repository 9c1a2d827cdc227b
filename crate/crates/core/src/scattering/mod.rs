//! Multichannel scattering matrix: exact solver, Born approximation, energy
//! sweeps and the Eisenbud-Wigner delay matrix.

mod born;
mod delay;
mod smatrix;
mod solver;
mod sweep;

pub use born::born_smatrix;
pub use delay::{ew_delay, DelaySegment, EwDelayMatrix};
pub use smatrix::{Direction, SMatrix};
pub use solver::{solve_smatrix, SolverOptions};
pub use sweep::{compute_sweep, partial_smatrix, sweep_on_grid, EnergyGrid, SMatrixSweep, SweepSegment};
