//! Small numerical building blocks: interpolation, quadrature, finite differences.

pub mod diff;
pub mod interp;
pub mod quad;
