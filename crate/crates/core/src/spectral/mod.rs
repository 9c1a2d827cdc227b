//! Channel momentum representation and the energy-fiber representation in
//! which the scattering matrix acts pointwise.

mod fiber;
mod packet;

pub use fiber::{
    apply_d0, apply_smatrix, channel_resolved_delay, commutator_delay, ew_expectation, fiber_grid_for,
    forward_transform, inverse_transform, scatter_packet, EwExpectation, FiberVector, SpectralOptions,
};
pub use packet::{ChannelWavepacket, MomentumProfile, PacketComponent, PacketSpec, SUPPORT_CUTOFF};
