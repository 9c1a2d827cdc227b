use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::packet::{ChannelWavepacket, PacketComponent, SUPPORT_CUTOFF};
use crate::numerics::diff::{stencil_at, Stencil};
use crate::numerics::interp::lagrange_weights;
use crate::numerics::quad::{simpson_weights, CompensatedSum};
use crate::scattering::{Direction, EnergyGrid, EwDelayMatrix, SMatrix, SMatrixSweep};
use crate::waveguide::TransverseBasis;
use crate::{Error, Result};

/// Discretisation parameters of the spectral representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralOptions {
    /// Momentum spacing of packets produced by the inverse transform.
    pub xi_step: f64,
    /// Energy spacing of fiber grids.
    pub energy_step: f64,
    /// Interpolation nodes for packet and fiber samples.
    pub packet_points: usize,
    /// Interpolation nodes for sweep data (scattering and delay matrices).
    pub matrix_points: usize,
    /// Order of the energy derivative in the fiber.
    pub stencil: Stencil,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            xi_step: 2e-3,
            energy_step: 2e-3,
            packet_points: 8,
            matrix_points: 4,
            stencil: Stencil::Fourth,
        }
    }
}

/// Sections of the energy fiber: at each energy a vector indexed like the
/// rows of [`SMatrix`] over the open channels of one inter-threshold interval.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberVector {
    grid: EnergyGrid,
    open: usize,
    values: Vec<Complex64>,
}

impl FiberVector {
    pub fn zeros(grid: EnergyGrid, open: usize) -> Self {
        Self {
            grid,
            open,
            values: vec![Complex64::new(0.0, 0.0); grid.len * 2 * open],
        }
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn open_count(&self) -> usize {
        self.open
    }

    pub fn at(&self, i: usize) -> &[Complex64] {
        let d = 2 * self.open;
        &self.values[i * d..(i + 1) * d]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut [Complex64] {
        let d = 2 * self.open;
        &mut self.values[i * d..(i + 1) * d]
    }

    pub fn value(&self, i: usize, channel: usize, direction: Direction) -> Complex64 {
        self.at(i)[SMatrix::index(channel, direction)]
    }

    fn quadrature(&self, f: impl Fn(usize) -> f64) -> f64 {
        let w = simpson_weights(self.grid.len, self.grid.step);
        let mut s = CompensatedSum::default();
        for (i, wi) in w.iter().enumerate() {
            s.add(wi * f(i));
        }
        s.value()
    }

    /// `<self, other>` with composite Simpson quadrature in energy.
    pub fn inner(&self, other: &FiberVector) -> Result<Complex64> {
        if self.grid != other.grid || self.open != other.open {
            return Err(Error::InvalidArgument("fiber vectors live on different grids".into()));
        }
        let re = self.quadrature(|i| {
            self.at(i).iter().zip(other.at(i)).map(|(a, b)| (a.conj() * b).re).sum()
        });
        let im = self.quadrature(|i| {
            self.at(i).iter().zip(other.at(i)).map(|(a, b)| (a.conj() * b).im).sum()
        });
        Ok(Complex64::new(re, im))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.quadrature(|i| self.at(i).iter().map(|z| z.norm_sqr()).sum())
    }

    fn peak(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Energy interval carrying significant weight.
    pub fn support(&self) -> Option<(f64, f64)> {
        let level = SUPPORT_CUTOFF * self.peak();
        let mut idx = (0..self.grid.len).filter(|&i| self.at(i).iter().any(|z| z.norm() >= level && level > 0.0));
        let first = idx.next()?;
        let last = idx.next_back().unwrap_or(first);
        Some((self.grid.point(first), self.grid.point(last)))
    }

    fn interpolate(&self, component: usize, energy: f64, points: usize) -> Complex64 {
        match lagrange_weights(self.grid.start, self.grid.step, self.grid.len, energy, points) {
            Some((first, w)) => w
                .iter()
                .enumerate()
                .map(|(k, wk)| self.at(first + k)[component] * wk)
                .sum(),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// A fiber grid of spacing `opts.energy_step` covering the packet's energy support.
pub fn fiber_grid_for(
    packet: &ChannelWavepacket,
    basis: &TransverseBasis,
    opts: &SpectralOptions,
) -> Result<EnergyGrid> {
    let (lo, hi) = packet.energy_support(basis)?;
    let (bottom, top) = basis.interval_of(lo);
    let window = basis.default_threshold_window();
    let pad = 20.0 * opts.energy_step;
    let start = (lo - pad).max(bottom + window);
    let end = (hi + pad).min(top - window);
    let mut len = ((end - start) / opts.energy_step).ceil() as usize + 1;
    if len % 2 == 0 {
        len += 1;
    }
    EnergyGrid::spanning(start, end, len.max(3))
}

fn check_grid(grid: &EnergyGrid, basis: &TransverseBasis) -> Result<(f64, f64)> {
    let interval = basis.interval_of(grid.start);
    if basis.interval_of(grid.end()) != interval || grid.start <= interval.0 {
        return Err(Error::InvalidArgument(format!(
            "fiber grid [{}, {}] must lie inside one inter-threshold interval",
            grid.start,
            grid.end()
        )));
    }
    if grid.len < 3 || grid.len % 2 == 0 {
        return Err(Error::InvalidArgument("fiber grids need an odd number (at least 3) of points".into()));
    }
    Ok(interval)
}

/// Maps a channel packet to the energy fiber on `grid`.
pub fn forward_transform(
    packet: &ChannelWavepacket,
    basis: &TransverseBasis,
    grid: EnergyGrid,
    opts: &SpectralOptions,
) -> Result<FiberVector> {
    check_grid(&grid, basis)?;
    let open = basis.thresholds().iter().take_while(|&&t| t < grid.start).count();
    let (lo, hi) = packet.energy_support(basis)?;
    if !grid.covers(lo, hi) {
        return Err(Error::Coverage(format!(
            "packet energy support [{lo}, {hi}] is not covered by the fiber grid [{}, {}]",
            grid.start,
            grid.end()
        )));
    }
    let mut out = FiberVector::zeros(grid, open);
    for c in &packet.components {
        if c.channel >= open {
            return Err(Error::Coverage(format!(
                "channel {} is closed on the fiber grid but carries weight",
                c.channel + 1
            )));
        }
        let nu = basis.threshold(c.channel);
        for i in 0..grid.len {
            let e = grid.point(i) - nu;
            let xi = e.sqrt();
            let scale = std::f64::consts::FRAC_1_SQRT_2 * e.powf(-0.25);
            let v = out.at_mut(i);
            v[SMatrix::index(c.channel, Direction::Right)] = c.value_at(xi, opts.packet_points) * scale;
            v[SMatrix::index(c.channel, Direction::Left)] = c.value_at(-xi, opts.packet_points) * scale;
        }
    }
    Ok(out)
}

/// Maps a fiber vector back to channel momentum samples with spacing `opts.xi_step`.
pub fn inverse_transform(
    fiber: &FiberVector,
    basis: &TransverseBasis,
    opts: &SpectralOptions,
) -> Result<ChannelWavepacket> {
    let grid = *fiber.grid();
    check_grid(&grid, basis)?;
    let h = opts.xi_step;
    let mut components = Vec::new();
    for a in 0..fiber.open_count() {
        let nu = basis.threshold(a);
        let xi_hi = (grid.end() - nu).sqrt();
        let xi_lo = (grid.start - nu).sqrt();
        let m = (xi_hi / h).floor() as i64;
        let samples: Vec<Complex64> = (-m..=m)
            .map(|j| {
                let xi = j as f64 * h;
                if xi.abs() < xi_lo {
                    return Complex64::new(0.0, 0.0);
                }
                let dir = if xi > 0.0 { Direction::Right } else { Direction::Left };
                let e = xi * xi + nu;
                fiber.interpolate(SMatrix::index(a, dir), e, opts.packet_points) * (2.0 * xi.abs()).sqrt()
            })
            .collect();
        if samples.iter().any(|z| z.norm() > 0.0) {
            components.push(PacketComponent {
                channel: a,
                xi_start: -(m as f64) * h,
                xi_step: h,
                samples,
            });
        }
    }
    Ok(ChannelWavepacket { components }.trimmed(1e-300))
}

/// Applies the scattering matrix pointwise in energy.
pub fn apply_smatrix(fiber: &FiberVector, sweep: &SMatrixSweep, opts: &SpectralOptions) -> Result<FiberVector> {
    let grid = *fiber.grid();
    let (lo, hi) = fiber
        .support()
        .unwrap_or((grid.start, grid.start));
    let seg = sweep.segment_covering(lo, hi).ok_or_else(|| {
        Error::Coverage(format!("no sweep segment covers the fiber support [{lo}, {hi}]"))
    })?;
    if seg.open_count() != fiber.open_count() {
        return Err(Error::InvalidArgument(format!(
            "sweep has {} open channels, fiber has {}",
            seg.open_count(),
            fiber.open_count()
        )));
    }
    let mut out = FiberVector::zeros(grid, fiber.open_count());
    for i in 0..grid.len {
        let e = grid.point(i);
        let Some(s) = seg.interpolate(e, opts.matrix_points) else {
            continue;
        };
        let v = DVector::from_column_slice(fiber.at(i));
        out.at_mut(i).copy_from_slice((s * v).as_slice());
    }
    Ok(out)
}

/// `D_0 = 2i d/dlambda` by finite differences.
pub fn apply_d0(fiber: &FiberVector, stencil: Stencil) -> Result<FiberVector> {
    let grid = *fiber.grid();
    let peak = fiber.peak();
    for i in [0, grid.len - 1] {
        if fiber.at(i).iter().any(|z| z.norm() > 1e-10 * peak) {
            return Err(Error::Stencil(format!(
                "fiber vector does not vanish at the grid end {}",
                grid.point(i)
            )));
        }
    }
    let order = stencil.order();
    let mut out = FiberVector::zeros(grid, fiber.open_count());
    let two_i = Complex64::new(0.0, 2.0);
    for i in 0..grid.len {
        let (first, w) = stencil_at(i, grid.len, order, grid.step)
            .ok_or_else(|| Error::Stencil(format!("fiber grid has only {} points", grid.len)))?;
        for comp in 0..2 * fiber.open_count() {
            let d: Complex64 = w.iter().enumerate().map(|(k, wk)| fiber.at(first + k)[comp] * wk).sum();
            out.at_mut(i)[comp] = two_i * d;
        }
    }
    Ok(out)
}

/// Expectation of the delay matrix with its (ideally vanishing) imaginary part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EwExpectation {
    pub value: f64,
    pub imaginary: f64,
}

/// `int <psi(lambda), tau(lambda) psi(lambda)> d lambda`.
pub fn ew_expectation(fiber: &FiberVector, delay: &EwDelayMatrix, opts: &SpectralOptions) -> Result<EwExpectation> {
    let grid = *fiber.grid();
    let (lo, hi) = fiber.support().ok_or_else(|| Error::InvalidArgument("fiber vector vanishes".into()))?;
    let seg = delay.segment_covering(lo, hi).ok_or_else(|| {
        Error::Coverage(format!("no delay segment covers the fiber support [{lo}, {hi}]"))
    })?;
    let vals: Vec<Complex64> = (0..grid.len)
        .map(|i| match seg.tau_at(grid.point(i), opts.matrix_points) {
            Some(tau) => {
                let v = DVector::from_column_slice(fiber.at(i));
                v.dotc(&(tau * &v))
            }
            None => Complex64::new(0.0, 0.0),
        })
        .collect();
    let w = simpson_weights(grid.len, grid.step);
    let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
    for (z, wi) in vals.iter().zip(&w) {
        re.add(wi * z.re);
        im.add(wi * z.im);
    }
    Ok(EwExpectation {
        value: re.value(),
        imaginary: im.value(),
    })
}

/// `-1/2 <psi, S* [D_0, S] psi>`, evaluated as `-1/2 <S psi, D_0 S psi - S D_0 psi>`.
pub fn commutator_delay(fiber: &FiberVector, sweep: &SMatrixSweep, opts: &SpectralOptions) -> Result<Complex64> {
    let s_psi = apply_smatrix(fiber, sweep, opts)?;
    let d_s_psi = apply_d0(&s_psi, opts.stencil)?;
    let s_d_psi = apply_smatrix(&apply_d0(fiber, opts.stencil)?, sweep, opts)?;
    let mut diff = d_s_psi;
    for i in 0..diff.grid().len {
        let b = s_d_psi.at(i).to_vec();
        for (x, y) in diff.at_mut(i).iter_mut().zip(b) {
            *x -= y;
        }
    }
    Ok(s_psi.inner(&diff)? * -0.5)
}

/// Channel-resolved form `-i int <psi_a, sum_b S_ba* dS_ba/dlambda psi_a>` for a
/// fiber vector supported in channel `channel` only.
pub fn channel_resolved_delay(
    fiber: &FiberVector,
    sweep: &SMatrixSweep,
    delay: &EwDelayMatrix,
    channel: usize,
    opts: &SpectralOptions,
) -> Result<Complex64> {
    let grid = *fiber.grid();
    let open = fiber.open_count();
    if channel >= open {
        return Err(Error::InvalidArgument(format!("channel {} is closed", channel + 1)));
    }
    let peak = fiber.peak();
    for i in 0..grid.len {
        for a in (0..open).filter(|&a| a != channel) {
            for d in [Direction::Left, Direction::Right] {
                if fiber.value(i, a, d).norm() > SUPPORT_CUTOFF * peak {
                    return Err(Error::InvalidArgument(format!(
                        "fiber vector has weight in channel {} besides channel {}",
                        a + 1,
                        channel + 1
                    )));
                }
            }
        }
    }
    let (lo, hi) = fiber.support().ok_or_else(|| Error::InvalidArgument("fiber vector vanishes".into()))?;
    let seg = sweep
        .segment_covering(lo, hi)
        .ok_or_else(|| Error::Coverage(format!("no sweep segment covers [{lo}, {hi}]")))?;
    let dseg = delay
        .segment_covering(lo, hi)
        .ok_or_else(|| Error::Coverage(format!("no delay segment covers [{lo}, {hi}]")))?;
    let vals: Vec<Complex64> = (0..grid.len)
        .map(|i| {
            let e = grid.point(i);
            let (Some(s), Some(ds)) = (seg.interpolate(e, opts.matrix_points), dseg.derivative_at(e, opts.matrix_points))
            else {
                return Complex64::new(0.0, 0.0);
            };
            let mut m = DMatrix::<Complex64>::zeros(2, 2);
            for b in 0..open {
                let sb = s.view((2 * b, 2 * channel), (2, 2));
                let db = ds.view((2 * b, 2 * channel), (2, 2));
                m += sb.adjoint() * db;
            }
            let v = DVector::from_column_slice(&fiber.at(i)[2 * channel..2 * channel + 2]);
            -Complex64::i() * v.dotc(&(m * &v))
        })
        .collect();
    let w = simpson_weights(grid.len, grid.step);
    Ok(vals.iter().zip(&w).map(|(z, wi)| z * wi).sum())
}

/// `S phi` as a channel packet: forward transform, pointwise scattering, inverse transform.
pub fn scatter_packet(
    packet: &ChannelWavepacket,
    basis: &TransverseBasis,
    sweep: &SMatrixSweep,
    opts: &SpectralOptions,
) -> Result<ChannelWavepacket> {
    let grid = fiber_grid_for(packet, basis, opts)?;
    let fiber = forward_transform(packet, basis, grid, opts)?;
    inverse_transform(&apply_smatrix(&fiber, sweep, opts)?, basis, opts)
}
