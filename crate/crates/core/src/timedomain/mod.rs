//! Time-dependent picture: free and full evolution, sojourn times and delays.

mod free;
mod grid;
mod propagate;
mod sojourn;

pub use free::{
    free_delay_from, half_line_integrals, sojourn_free, tau_free, whole_line, FreeOccupation, FreeOptions, TimeIntegral,
};
pub use grid::{fft_friendly, sample_packet, FftPair, GridState, OccupationWeights, PeriodicGrid};
pub use propagate::{coupled_channels, full_propagate, PropagationLimits, PropagationReport, SplitStep};
pub use sojourn::{
    far_field,
    default_radii, plateau, prepare_scattering_state, sojourn_full, time_delay, FullSojourn, Plateau,
    PreparationReport, SojournRecord, TimeDomainOptions, TimeDomainSetup,
};
