//! Sojourn times under the full evolution and the resulting time delay.

use serde::{Deserialize, Serialize};

use super::free::{free_delay_from, half_line_integrals, whole_line, FreeOccupation, FreeOptions};
use super::grid::{sample_packet, FftPair, GridState, OccupationWeights, PeriodicGrid};
use super::propagate::{coupled_channels, full_propagate, PropagationLimits, SplitStep};
use crate::exec::Execution;
use crate::numerics::quad::CompensatedSum;
use crate::spectral::ChannelWavepacket;
use crate::waveguide::{compute_coupling, CouplingMatrix, PotentialSpec, TransverseBasis, XGrid};
use crate::{Error, Result};

/// Grid, integrator and tolerance settings of the time-dependent runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeDomainOptions {
    /// Half-length `X` of the periodic grid `[-X, X)`.
    pub extent: f64,
    pub dx: f64,
    pub dt: f64,
    /// Start of the interacting window; chosen automatically when absent.
    pub t0: Option<f64>,
    /// End of the interacting window; chosen automatically when absent.
    pub t1: Option<f64>,
    /// Number of channels available to the propagation (all basis modes when absent).
    pub channels: Option<usize>,
    /// Largest admitted probability inside the interaction region at `t0` and `t1`.
    pub overlap_tolerance: f64,
    pub leak_tolerance: f64,
    pub norm_tolerance: f64,
    pub quadrature_order: usize,
    /// Relative level defining the interaction region of the coupling.
    pub interaction_cutoff: f64,
    /// Record `(t, P_r)` every this many steps; zero disables the trace.
    pub trace_every: usize,
    pub free: FreeOptions,
}

impl Default for TimeDomainOptions {
    fn default() -> Self {
        Self {
            extent: 96.0,
            dx: 0.05,
            dt: 2e-3,
            t0: None,
            t1: None,
            channels: None,
            overlap_tolerance: 1e-8,
            leak_tolerance: 1e-10,
            norm_tolerance: 1e-10,
            quadrature_order: 64,
            interaction_cutoff: 1e-12,
            trace_every: 0,
            free: FreeOptions::default(),
        }
    }
}

/// Everything needed to propagate one packet under the full Hamiltonian.
#[derive(Clone, Debug)]
pub struct TimeDomainSetup {
    pub basis: TransverseBasis,
    pub grid: PeriodicGrid,
    pub coupling: CouplingMatrix,
    pub propagator: SplitStep,
    /// Radius beyond which the coupling is negligible.
    pub interaction_radius: f64,
    pub options: TimeDomainOptions,
}

impl TimeDomainSetup {
    pub fn new(
        potential: &PotentialSpec,
        basis: &TransverseBasis,
        packet: &ChannelWavepacket,
        opts: &TimeDomainOptions,
    ) -> Result<Self> {
        let grid = PeriodicGrid::symmetric(opts.extent, opts.dx)?;
        let xgrid = XGrid {
            start: grid.start,
            step: grid.step,
            len: grid.len,
        };
        let limit = opts.channels.unwrap_or(basis.mode_count()).min(basis.mode_count());
        let coupling = compute_coupling(potential, basis, &xgrid, opts.quadrature_order)?;
        let interaction_radius = coupling.matching_radius(opts.interaction_cutoff)?;
        let seed: Vec<usize> = packet.components.iter().map(|c| c.channel).collect();
        if let Some(&c) = seed.iter().find(|&&c| c >= limit) {
            return Err(Error::InvalidArgument(format!(
                "packet occupies channel {} but only {limit} channels are propagated",
                c + 1
            )));
        }
        let channels = coupled_channels(&coupling, &seed, limit);
        let propagator = SplitStep::new(&coupling, basis, &grid, opts.dt, &channels)?;
        Ok(Self {
            basis: basis.clone(),
            grid,
            coupling,
            propagator,
            interaction_radius,
            options: opts.clone(),
        })
    }

    pub fn channels(&self) -> &[usize] {
        self.propagator.channels()
    }
}

/// Diagnostics of the prepared incoming state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PreparationReport {
    pub t0: f64,
    /// Probability inside the interaction region at `t0`.
    pub overlap: f64,
    /// Probability in the outer 5% of the grid at `t0`.
    pub edge_probability: f64,
}

/// Earliest-needed start time: the free packet's probability in `[-R, R]`
/// stays below `tolerance` for all `t <= t0`.
fn automatic_t0(packet: &ChannelWavepacket, radius: f64, tolerance: f64, opts: &FreeOptions, exec: Execution) -> Result<f64> {
    let r = radius.max(1e-3);
    let occ = FreeOccupation::from_packet(packet, &[r], opts, exec)?;
    let (lo, _) = occ.window();
    let (_, xi_max) = packet.momentum_range();
    let h = (0.25 / xi_max.max(1.0)).min(-lo / 64.0);
    let total = packet.norm_sqr();
    // scan backwards from the far end of the window for the last crossing
    let mut t = lo;
    while t < 0.0 {
        if occ.occupation(t)[0] > tolerance * total {
            return Ok(t - h);
        }
        t += h;
    }
    // already clear of the region before t = 0
    Ok(-h)
}

/// `e^{-i t0 H_0} phi` sampled on the grid, with `t0` chosen when not configured.
pub fn prepare_scattering_state(
    packet: &ChannelWavepacket,
    setup: &TimeDomainSetup,
    exec: Execution,
) -> Result<(GridState, PreparationReport)> {
    let opts = &setup.options;
    let t0 = match opts.t0 {
        Some(t) => t,
        None => automatic_t0(packet, setup.interaction_radius, opts.overlap_tolerance, &opts.free, exec)?,
    };
    if !(t0 < 0.0) {
        return Err(Error::InvalidArgument("start time must be negative".into()));
    }
    let total = packet.norm_sqr();
    // every component must travel towards the interaction region
    let evolved = packet.free_evolve(&setup.basis, t0);
    for c in &evolved.components {
        let (mean, _) = c.position_moments();
        let toward: f64 = (0..c.samples.len())
            .filter(|&i| c.xi(i) * mean < 0.0 || mean == 0.0)
            .map(|i| c.samples[i].norm_sqr())
            .sum::<f64>()
            * c.xi_step;
        if toward < (1.0 - opts.overlap_tolerance) * c.norm_sqr() {
            return Err(Error::Admissibility(format!(
                "channel {} carries momentum pointing away from the potential at t0 = {t0}",
                c.channel + 1
            )));
        }
    }
    let state = sample_packet(packet, &setup.basis, &setup.grid, setup.channels(), t0, exec)?;
    let weights = OccupationWeights::new(&setup.grid, &[setup.interaction_radius.max(1e-3)])?;
    let overlap = weights.evaluate(&state.density())[0] / total;
    let edge = state.edge_probability(0.05) / total;
    if overlap > opts.overlap_tolerance {
        return Err(Error::DomainTooSmall(format!(
            "overlap {overlap:.3e} with the interaction region at t0 = {t0} exceeds {:.1e}",
            opts.overlap_tolerance
        )));
    }
    if edge > opts.leak_tolerance {
        return Err(Error::DomainTooSmall(format!(
            "the incoming packet at t0 = {t0} does not fit on the grid (edge probability {edge:.3e})"
        )));
    }
    Ok((state, PreparationReport { t0, overlap, edge_probability: edge }))
}

/// Part of `state` whose free energies lie in `[band.0, band.1]`, together
/// with the probability removed. After the collision the exact state carries
/// only the energies of the incoming packet, so everything else is left over
/// from the finite start time or from the splitting.
pub fn far_field(state: &GridState, basis: &TransverseBasis, band: (f64, f64)) -> (GridState, f64) {
    let grid = state.grid;
    let n = grid.len;
    let fft = FftPair::new(n);
    let before = state.norm_sqr();
    let mut out = state.clone();
    for (amp, &ch) in out.amplitudes.iter_mut().zip(&state.channels) {
        let nu = basis.threshold(ch);
        fft.forward.process(amp);
        for (m, z) in amp.iter_mut().enumerate() {
            let e = grid.momentum(m).powi(2) + nu;
            if e < band.0 || e > band.1 {
                *z = 0.0.into();
            } else {
                *z /= n as f64;
            }
        }
        fft.inverse.process(amp);
    }
    let removed = (before - out.norm_sqr()).max(0.0);
    (out, removed)
}

/// Full sojourn times with the contributions of each time interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FullSojourn {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Part accumulated while propagating under the full Hamiltonian.
    pub interacting: Vec<f64>,
    /// Free tails before `t0` and after `t1`.
    pub incoming_tail: Vec<f64>,
    pub outgoing_tail: Vec<f64>,
    pub tail_bound: f64,
    pub preparation: PreparationReport,
    pub t1: f64,
    pub steps: usize,
    pub norm_drift: f64,
    pub max_edge_probability: f64,
    pub energy_drift: f64,
    /// Probability outside the packet's energy band dropped before the free continuation.
    pub far_field_discarded: f64,
    /// `(t, P_r(t))` samples of the interacting window.
    pub trace: Vec<(f64, Vec<f64>)>,
}

/// Full sojourn times `T_r` for the scattering state asymptotic to `packet`.
pub fn sojourn_full(
    packet: &ChannelWavepacket,
    radii: &[f64],
    setup: &TimeDomainSetup,
    exec: Execution,
) -> Result<FullSojourn> {
    check_radii(radii, setup.grid.extent())?;
    let incoming = FreeOccupation::from_packet(packet, radii, &setup.options.free, exec)?;
    sojourn_full_with(packet, &incoming, radii, setup, exec)
}

fn sojourn_full_with(
    packet: &ChannelWavepacket,
    incoming: &FreeOccupation,
    radii: &[f64],
    setup: &TimeDomainSetup,
    exec: Execution,
) -> Result<FullSojourn> {
    let opts = &setup.options;
    let (mut state, preparation) = prepare_scattering_state(packet, setup, exec)?;
    let t0 = preparation.t0;
    let dt = opts.dt;
    let total = packet.norm_sqr();
    let weights = OccupationWeights::new(&setup.grid, radii)?;
    let probe = OccupationWeights::new(&setup.grid, &[setup.interaction_radius.max(1e-3)])?;
    let energy0 = setup.propagator.energy(&state)?;

    let nr = radii.len();
    let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::default(); nr];
    let first = weights.evaluate(&state.density());
    for (s, p) in sums.iter_mut().zip(&first) {
        s.add(p / 3.0);
    }
    let fixed_end = opts.t1.map(|t1| {
        let n = ((t1 - t0) / dt).ceil() as usize;
        n + n % 2
    });
    let max_steps = fixed_end.unwrap_or_else(|| {
        // generous bound: the slowest significant component must be able to
        // cross the grid
        let (xi_lo, _) = packet.momentum_range();
        let n = ((-t0 + 4.0 * setup.grid.extent() / (2.0 * xi_lo.max(1e-3))) / dt).ceil() as usize;
        n + n % 2
    });
    let mut last: Vec<f64> = first.clone();
    let mut done_at = None;
    let mut trace = Vec::new();
    if opts.trace_every > 0 {
        trace.push((state.time, first.clone()));
    }
    let limits = PropagationLimits {
        norm_tolerance: opts.norm_tolerance,
        leak_tolerance: opts.leak_tolerance,
    };
    let mut k = 0usize;
    let report = full_propagate(&mut state, &setup.propagator, max_steps, &limits, |s| {
        k += 1;
        let density = s.density();
        let p = weights.evaluate(&density);
        let w = if k % 2 == 1 { 4.0 / 3.0 } else { 2.0 / 3.0 };
        for (sum, v) in sums.iter_mut().zip(&p) {
            sum.add(w * v);
        }
        if opts.trace_every > 0 && k % opts.trace_every == 0 {
            trace.push((s.time, p.clone()));
        }
        last = p;
        if fixed_end.is_some() {
            return true;
        }
        if k % 2 == 0 && s.time > 0.0 && probe.evaluate(&density)[0] <= opts.overlap_tolerance * total {
            done_at = Some(k);
            return false;
        }
        true
    })?;
    if fixed_end.is_none() && done_at.is_none() {
        return Err(Error::WindowTooShort(format!(
            "the state did not leave the interaction region within {max_steps} steps"
        )));
    }
    if report.steps % 2 == 1 {
        return Err(Error::IntegratorFailure("odd number of Simpson intervals".into()));
    }
    let t1 = state.time;
    if let Some(p) = probe.evaluate(&state.density()).first() {
        if *p > opts.overlap_tolerance * total {
            return Err(Error::WindowTooShort(format!(
                "probability {:.3e} remains in the interaction region at t1 = {t1}",
                p / total
            )));
        }
    }
    // the final node was added with an interior weight
    let interacting: Vec<f64> = sums
        .iter()
        .zip(&last)
        .map(|(s, p)| (s.value() - p / 3.0) * dt)
        .collect();
    let energy_drift = (setup.propagator.energy(&state)? - energy0).abs() / energy0.abs().max(1e-300);

    let before = incoming.integrate(None, Some(t0), &opts.free, exec)?;
    let (lo, hi) = packet.energy_support(&setup.basis)?;
    // keep clear of the threshold below, where momenta vanish
    let (floor, _) = setup.basis.interval_of(lo);
    let margin = 0.05 * (hi - lo);
    let band = ((lo - margin).max(0.5 * (lo + floor)), hi + margin);
    let (outgoing, far_field_discarded) = far_field(&state, &setup.basis, band);
    let after = FreeOccupation::from_grid_state(&outgoing, radii, &opts.free, exec)?.integrate(Some(t1), None, &opts.free, exec)?;
    let values = (0..nr)
        .map(|i| before.values[i] + interacting[i] + after.values[i])
        .collect();
    Ok(FullSojourn {
        radii: radii.to_vec(),
        values,
        interacting,
        incoming_tail: before.values,
        outgoing_tail: after.values,
        tail_bound: before.tail_bound + after.tail_bound + before.quadrature_error + after.quadrature_error,
        preparation,
        t1,
        steps: report.steps,
        norm_drift: report.norm_drift,
        max_edge_probability: report.max_edge_probability,
        energy_drift,
        far_field_discarded,
        trace,
    })
}

fn check_radii(radii: &[f64], extent: f64) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii requested".into()));
    }
    for &r in radii {
        if !(r >= 0.0) || r > 0.5 * extent {
            return Err(Error::InvalidArgument(format!(
                "radius {r} must lie in [0, X/2] = [0, {}]",
                0.5 * extent
            )));
        }
    }
    Ok(())
}

/// Geometric progression of `count` radii ending at `r_max`.
pub fn default_radii(r_max: f64, count: usize) -> Vec<f64> {
    let count = count.max(1);
    let r_min = r_max / 8.0;
    (0..count)
        .map(|i| {
            if count == 1 {
                r_max
            } else {
                r_min * (r_max / r_min).powf(i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

/// Estimate of the large-radius limit of a delay curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Plateau {
    /// Mean over the upper quartile of radii.
    pub value: f64,
    /// Least-squares slope over the upper half of radii.
    pub slope: f64,
}

pub fn plateau(radii: &[f64], values: &[f64]) -> Plateau {
    let n = radii.len();
    let q = (n / 4).max(1);
    let value = values[n - q..].iter().sum::<f64>() / q as f64;
    let h = (n / 2).max(2).min(n);
    let (xs, ys) = (&radii[n - h..], &values[n - h..]);
    let mx = xs.iter().sum::<f64>() / h as f64;
    let my = ys.iter().sum::<f64>() / h as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Plateau {
        value,
        slope: if sxx > 0.0 { sxy / sxx } else { 0.0 },
    }
}

/// Per-radius sojourn times and delays of one packet.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SojournRecord {
    pub radii: Vec<f64>,
    /// `T_r` under the full evolution.
    pub full: Vec<f64>,
    /// `T_r^0` of the incoming packet.
    pub free_incoming: Vec<f64>,
    /// `T_r^0` of the scattered packet.
    pub free_scattered: Vec<f64>,
    pub delay: Vec<f64>,
    pub free_delay: Vec<f64>,
    pub full_tail_bound: f64,
    pub free_tail_bound: f64,
    pub plateau: Plateau,
    pub run: FullSojourn,
}

impl SojournRecord {
    pub fn delay_at_max_radius(&self) -> f64 {
        *self.delay.last().expect("record has radii")
    }

    pub fn free_delay_at_max_radius(&self) -> f64 {
        *self.free_delay.last().expect("record has radii")
    }
}

/// `tau_r = T_r - (T_r^0[phi] + T_r^0[S phi]) / 2` together with the free delay.
pub fn time_delay(
    packet: &ChannelWavepacket,
    scattered: &ChannelWavepacket,
    radii: &[f64],
    setup: &TimeDomainSetup,
    exec: Execution,
) -> Result<SojournRecord> {
    check_radii(radii, setup.grid.extent())?;
    let free_opts = &setup.options.free;
    let before = FreeOccupation::from_packet(packet, radii, free_opts, exec)?;
    let after = FreeOccupation::from_packet(scattered, radii, free_opts, exec)?;
    let run = sojourn_full_with(packet, &before, radii, setup, exec)?;
    let before = half_line_integrals(&before, free_opts, exec)?;
    let after = half_line_integrals(&after, free_opts, exec)?;
    let free_delay = free_delay_from(&before, &after);
    let (incoming, outgoing) = (whole_line(&before), whole_line(&after));
    let delay: Vec<f64> = (0..radii.len())
        .map(|i| run.values[i] - 0.5 * (incoming.values[i] + outgoing.values[i]))
        .collect();
    Ok(SojournRecord {
        radii: radii.to_vec(),
        full: run.values.clone(),
        free_incoming: incoming.values,
        free_scattered: outgoing.values,
        plateau: plateau(radii, &delay),
        delay,
        free_delay,
        full_tail_bound: run.tail_bound,
        free_tail_bound: incoming.tail_bound + outgoing.tail_bound + incoming.quadrature_error + outgoing.quadrature_error,
        run,
    })
}
