//! Stationary and time-dependent time delay for multichannel scattering in a
//! straight two-dimensional waveguide.
//!
//! The crate is organised by role:
//! - [`waveguide`]: transverse modes, thresholds, potentials and channel coupling.
//! - [`scattering`]: the multichannel scattering matrix, its Born approximation,
//!   energy sweeps and the Eisenbud-Wigner delay matrix.
//! - [`spectral`]: wave packets in channel momentum space and the energy-fiber
//!   representation in which the scattering matrix acts.
//! - [`timedomain`]: free and full time evolution, sojourn times and delays.
//! - [`oracles`]: closed-form reference solutions used for validation.
//! - [`scenario`], [`output`] and [`verify`]: configuration, file output and the
//!   check suites run by the command-line tool.

pub mod error;
pub mod exec;
pub mod numerics;
pub mod oracles;
pub mod output;
pub mod scattering;
pub mod scenario;
pub mod spectral;
pub mod timedomain;
pub mod verify;
pub mod waveguide;

pub use error::{Error, Result};
pub use exec::Execution;
pub use num_complex::Complex64;
