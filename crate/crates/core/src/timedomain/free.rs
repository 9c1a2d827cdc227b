//! Free evolution and time integrals of the occupation probability
//! `P_r(t) = ||F_r e^{-i t H_0} phi||^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{edge_probability, fft_friendly, FftPair, GridState, OccupationWeights, PeriodicGrid};
use crate::exec::{map_range, Execution};
use crate::numerics::quad::{gauss_legendre, CompensatedSum};
use crate::spectral::ChannelWavepacket;
use crate::{Error, Result};

/// Accuracy targets of the free time integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeOptions {
    /// Relative convergence target of the adaptive time quadrature.
    pub tolerance: f64,
    /// Relative level of `P_r` (and of the probability near the grid edge)
    /// at which the time window is cut.
    pub window_cutoff: f64,
    /// Fraction of a grid state's weight that may be discarded at high momenta
    /// when it is continued freely.
    pub spectral_cutoff: f64,
    /// A window is also accepted once `P_r` at its ends times its half-length
    /// falls below this fraction of the peak occupation.
    pub tail_tolerance: f64,
    pub max_intervals: usize,
}

impl Default for FreeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            window_cutoff: 1e-14,
            spectral_cutoff: 1e-12,
            tail_tolerance: 1e-10,
            max_intervals: 1 << 12,
        }
    }
}

/// Result of a time integral of occupation probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeIntegral {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Estimated contribution of the discarded time tails.
    pub tail_bound: f64,
    /// Estimated quadrature error from the last refinement.
    pub quadrature_error: f64,
    pub evaluations: usize,
}

/// Exact free evolution of a band-limited state on a periodic grid large
/// enough to hold it for the whole time window.
#[derive(Clone, Debug)]
pub struct FreeOccupation {
    grid: PeriodicGrid,
    /// DFT indices carrying amplitude, with their squared momenta.
    support: Vec<(usize, f64)>,
    /// Per channel, amplitudes at the reference time on `support`.
    spectra: Vec<Vec<Complex64>>,
    reference_time: f64,
    half_window: f64,
    weights: OccupationWeights,
    fft: FftPair,
    max_radius: f64,
    /// Probability dropped from the band of a continued grid state.
    discarded: f64,
}

/// Where the evolved state lives at the reference time.
struct Source<'a> {
    spectrum: Box<dyn Fn(usize, f64) -> Complex64 + Sync + 'a>,
    channels: usize,
    xi_max: f64,
    xi_min: f64,
    extent: f64,
}

impl FreeOccupation {
    /// Occupations of `e^{-i t H_0} packet`, referenced to `t = 0`.
    pub fn from_packet(packet: &ChannelWavepacket, radii: &[f64], opts: &FreeOptions, exec: Execution) -> Result<Self> {
        if packet.components.is_empty() {
            return Err(Error::InvalidArgument("empty packet".into()));
        }
        let (xi_lo, xi_hi) = speed_quantiles(packet);
        let (mean, spread) = packet.position_moments();
        let extent = mean.abs() + 14.0 * spread + 2.0;
        let (_, xi_max) = packet.momentum_range();
        let comps = packet.components.clone();
        let source = Source {
            spectrum: Box::new(move |c, xi| comps[c].value_at(xi, 8)),
            channels: packet.components.len(),
            xi_max: xi_max.max(xi_hi),
            xi_min: xi_lo,
            extent,
        };
        Self::build(source, 0.0, radii, opts, exec)
    }

    /// Occupations of `e^{-i (t - t_s) H_0} state` for a grid state at time `t_s`.
    pub fn from_grid_state(state: &GridState, radii: &[f64], opts: &FreeOptions, exec: Execution) -> Result<Self> {
        let grid = state.grid;
        let fft = FftPair::new(grid.len);
        let mut power = vec![0.0; grid.len];
        let mut specs = Vec::new();
        for amp in &state.amplitudes {
            let mut a = amp.clone();
            fft.forward.process(&mut a);
            for (p, z) in power.iter_mut().zip(&a) {
                *p += z.norm_sqr();
            }
            specs.push(a);
        }
        let total: f64 = power.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("grid state vanishes".into()));
        }
        // momentum band carrying all but a negligible fraction of the weight
        let mut order: Vec<usize> = (0..grid.len).collect();
        order.sort_by(|&a, &b| grid.momentum(a).abs().total_cmp(&grid.momentum(b).abs()));
        let mut tail = 0.0;
        let mut xi_max = 0.0;
        let mut discarded = 0.0;
        for &m in order.iter().rev() {
            if tail + power[m] > opts.spectral_cutoff * total {
                xi_max = grid.momentum(m).abs();
                break;
            }
            tail += power[m];
            discarded = tail / total;
        }
        let mut acc = 0.0;
        let mut xi_min = 0.0;
        for &m in &order {
            acc += power[m];
            if acc > opts.spectral_cutoff * total {
                xi_min = grid.momentum(m).abs();
                break;
            }
        }
        let density = state.density();
        let peak = density.iter().cloned().fold(0.0, f64::max);
        let extent = (0..grid.len)
            .filter(|&j| density[j] > 1e-20 * peak)
            .map(|j| grid.x(j).abs())
            .fold(0.0, f64::max)
            + 2.0;
        let amps = state.amplitudes.clone();
        let scale = grid.step / (2.0 * PI).sqrt();
        let source = Source {
            spectrum: Box::new(move |c, xi| {
                // phase recurrence, re-anchored periodically to bound round-off growth
                let step = Complex64::from_polar(1.0, -xi * grid.step);
                let mut phase = Complex64::new(1.0, 0.0);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, z) in amps[c].iter().enumerate() {
                    if j % 256 == 0 {
                        phase = Complex64::from_polar(1.0, -xi * grid.x(j));
                    }
                    acc += z * phase;
                    phase *= step;
                }
                acc * scale
            }),
            channels: state.amplitudes.len(),
            xi_max: xi_max.max(1e-3),
            xi_min: xi_min.max(1e-3),
            extent,
        };
        let mut occ = Self::build(source, state.time, radii, opts, exec)?;
        occ.discarded = discarded * state.norm_sqr();
        Ok(occ)
    }

    fn build(source: Source<'_>, reference_time: f64, radii: &[f64], opts: &FreeOptions, exec: Execution) -> Result<Self> {
        let max_radius = radii.iter().cloned().fold(0.0, f64::max);
        let v_lo = 2.0 * source.xi_min.max(1e-3);
        let v_hi = 2.0 * source.xi_max;
        let mut half_window = (max_radius + source.extent) / v_lo * 1.2 + 1.0;
        let mut grid_scale = 1.0;
        // the density is band-limited to twice the largest momentum
        let step = PI / (2.2 * source.xi_max).max(1.0);
        'attempt: for _ in 0..10 {
            let extent = (v_hi * half_window + source.extent).max(max_radius + source.extent) * 1.1 * grid_scale + 10.0;
            let len = fft_friendly((2.0 * extent / step).ceil() as usize);
            let grid = PeriodicGrid {
                start: -(len as f64) * step / 2.0,
                step,
                len,
            };
            let occ = Self::sample(&source, grid, reference_time, half_window, radii, max_radius, exec)?;
            let peak = occ.probe_peak(exec).max(1e-300);
            for t in [reference_time - half_window, reference_time + half_window] {
                let (p, edge) = occ.occupation_and_edge(t);
                let end = p.iter().cloned().fold(0.0, f64::max);
                if end > opts.window_cutoff * peak && end * half_window > opts.tail_tolerance * peak {
                    half_window *= 1.5;
                    continue 'attempt;
                }
                if edge > opts.window_cutoff {
                    grid_scale *= 1.5;
                    continue 'attempt;
                }
            }
            return Ok(occ);
        }
        Err(Error::WindowTooShort(
            "free evolution window did not converge: the packet lingers or spreads too slowly".into(),
        ))
    }

    fn sample(
        source: &Source<'_>,
        grid: PeriodicGrid,
        reference_time: f64,
        half_window: f64,
        radii: &[f64],
        max_radius: f64,
        exec: Execution,
    ) -> Result<Self> {
        let n = grid.len;
        let dxi = 2.0 * PI / (n as f64 * grid.step);
        let support: Vec<(usize, f64)> = (0..n)
            .map(|m| (m, grid.momentum(m)))
            .filter(|(_, xi)| xi.abs() <= source.xi_max * 1.05 + 4.0 * dxi)
            .map(|(m, xi)| (m, xi * xi))
            .collect();
        let spectra = (0..source.channels)
            .map(|c| {
                map_range(support.len(), exec, |i| {
                    let xi = grid.momentum(support[i].0);
                    (source.spectrum)(c, xi) * Complex64::from_polar(dxi / (2.0 * PI).sqrt(), xi * grid.start)
                })
            })
            .collect();
        Ok(Self {
            grid,
            support,
            spectra,
            reference_time,
            half_window,
            weights: OccupationWeights::new(&grid, radii)?,
            fft: FftPair::new(n),
            max_radius,
            discarded: 0.0,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn reference_time(&self) -> f64 {
        self.reference_time
    }

    /// Time window `[t_ref - T, t_ref + T]` outside which all occupations are negligible.
    pub fn window(&self) -> (f64, f64) {
        (self.reference_time - self.half_window, self.reference_time + self.half_window)
    }

    pub fn radii(&self) -> &[f64] {
        &self.weights.radii
    }

    /// Density at time `t` on the grid.
    pub fn density(&self, t: f64) -> Vec<f64> {
        let tau = t - self.reference_time;
        let mut d = vec![0.0; self.grid.len];
        let phases: Vec<Complex64> = self
            .support
            .iter()
            .map(|&(_, xi2)| Complex64::from_polar(1.0, -tau * xi2))
            .collect();
        let mut a = vec![Complex64::new(0.0, 0.0); self.grid.len];
        for spec in &self.spectra {
            a.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for ((&(m, _), z), p) in self.support.iter().zip(spec).zip(&phases) {
                a[m] = z * p;
            }
            self.fft.inverse.process(&mut a);
            for (dj, z) in d.iter_mut().zip(&a) {
                *dj += z.norm_sqr();
            }
        }
        d
    }

    /// `P_r(t)` for every radius.
    pub fn occupation(&self, t: f64) -> Vec<f64> {
        self.weights.evaluate(&self.density(t))
    }

    fn occupation_and_edge(&self, t: f64) -> (Vec<f64>, f64) {
        let d = self.density(t);
        (self.weights.evaluate(&d), edge_probability(&self.grid, &d, 0.05))
    }

    /// Largest occupation of the biggest radius on a coarse time scan.
    fn probe_peak(&self, exec: Execution) -> f64 {
        let (a, b) = self.window();
        let n = 64;
        let idx = self
            .weights
            .radii
            .iter()
            .position(|&r| r == self.max_radius)
            .unwrap_or(0);
        map_range(n + 1, exec, |i| self.occupation(a + (b - a) * i as f64 / n as f64)[idx])
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// `int P_r(t) dt` over `[from, to]`, with open ends meaning the full window.
    pub fn integrate(&self, from: Option<f64>, to: Option<f64>, opts: &FreeOptions, exec: Execution) -> Result<TimeIntegral> {
        let (wa, wb) = self.window();
        let a = from.map_or(wa, |f| f.max(wa));
        let b = to.map_or(wb, |t| t.min(wb));
        let nr = self.weights.radii.len();
        // dropped high-momentum weight can at most occupy the region for the whole window
        let mut tail_bound = self.discarded * (b - a).max(0.0);
        for (open, t) in [(from.is_none() || from.unwrap() < wa, wa), (to.is_none() || to.unwrap() > wb, wb)] {
            if open {
                let p = self.occupation(t);
                tail_bound += p.iter().cloned().fold(0.0, f64::max) * self.half_window;
            }
        }
        if !(b > a) {
            return Ok(TimeIntegral {
                radii: self.weights.radii.clone(),
                values: vec![0.0; nr],
                tail_bound,
                quadrature_error: 0.0,
                evaluations: 0,
            });
        }
        // adaptive bisection with a fixed Gauss-Legendre rule: each piece
        // compares the rule on itself with the rule on its two halves
        const ORDER: usize = 16;
        let (ref_nodes, ref_weights) = gauss_legendre(ORDER, -1.0, 1.0);
        let rule = |lo: f64, hi: f64| -> Vec<f64> {
            let (h, m) = (0.5 * (hi - lo), 0.5 * (hi + lo));
            ref_nodes.iter().map(|x| m + h * x).collect()
        };
        let apply = |lo: f64, hi: f64, values: &[Vec<f64>]| -> Vec<f64> {
            let h = 0.5 * (hi - lo);
            (0..nr)
                .map(|r| {
                    let mut s = CompensatedSum::default();
                    for (w, v) in ref_weights.iter().zip(values) {
                        s.add(w * v[r]);
                    }
                    s.value() * h
                })
                .collect()
        };
        let eval_pieces = |pieces: &[(f64, f64)]| -> Vec<Vec<f64>> {
            let times: Vec<f64> = pieces.iter().flat_map(|&(lo, hi)| rule(lo, hi)).collect();
            let vals = map_range(times.len(), exec, |i| self.occupation(times[i]));
            pieces
                .iter()
                .enumerate()
                .map(|(k, &(lo, hi))| apply(lo, hi, &vals[k * ORDER..(k + 1) * ORDER]))
                .collect()
        };
        let initial = 16;
        let mut pending: Vec<(f64, f64, Vec<f64>)> = {
            let pieces: Vec<(f64, f64)> = (0..initial)
                .map(|k| (a + (b - a) * k as f64 / initial as f64, a + (b - a) * (k + 1) as f64 / initial as f64))
                .collect();
            let q = eval_pieces(&pieces);
            pieces.into_iter().zip(q).map(|((lo, hi), q)| (lo, hi, q)).collect()
        };
        let mut evaluations = initial * ORDER;
        let mut accepted = vec![CompensatedSum::default(); nr];
        let mut quadrature_error = 0.0;
        loop {
            let halves: Vec<(f64, f64)> = pending
                .iter()
                .flat_map(|&(lo, hi, _)| {
                    let m = 0.5 * (lo + hi);
                    [(lo, m), (m, hi)]
                })
                .collect();
            let q = eval_pieces(&halves);
            evaluations += halves.len() * ORDER;
            // running estimate of the integral for the relative target
            let mut estimate: Vec<f64> = accepted.iter().map(|s| s.value()).collect();
            for pair in q.chunks(2) {
                for r in 0..nr {
                    estimate[r] += pair[0][r] + pair[1][r];
                }
            }
            let scale = estimate.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
            let mut next = Vec::new();
            for ((lo, hi, whole), pair) in pending.iter().zip(q.chunks(2)) {
                let err = (0..nr)
                    .map(|r| (whole[r] - pair[0][r] - pair[1][r]).abs())
                    .fold(0.0, f64::max);
                if err <= opts.tolerance * scale * (hi - lo) / (b - a) || err < 1e-300 {
                    for r in 0..nr {
                        accepted[r].add(pair[0][r] + pair[1][r]);
                    }
                    quadrature_error += err;
                } else {
                    let m = 0.5 * (lo + hi);
                    next.push((*lo, m, pair[0].clone()));
                    next.push((m, *hi, pair[1].clone()));
                }
            }
            if next.is_empty() {
                return Ok(TimeIntegral {
                    radii: self.weights.radii.clone(),
                    values: accepted.iter().map(|s| s.value()).collect(),
                    tail_bound,
                    quadrature_error,
                    evaluations,
                });
            }
            if evaluations > opts.max_intervals * ORDER {
                return Err(Error::IntegratorFailure(format!(
                    "time quadrature did not converge after {evaluations} evaluations"
                )));
            }
            pending = next;
        }
    }
}

/// Momentum magnitudes below and above which the packet carries negligible weight.
fn speed_quantiles(packet: &ChannelWavepacket) -> (f64, f64) {
    let mut pts: Vec<(f64, f64)> = packet
        .components
        .iter()
        .flat_map(|c| (0..c.samples.len()).map(move |i| (c.xi(i).abs(), c.samples[i].norm_sqr())))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    let mut lo = pts[0].0;
    for p in &pts {
        acc += p.1;
        if acc > 1e-16 * total {
            lo = p.0;
            break;
        }
    }
    acc = 0.0;
    let mut hi = pts[pts.len() - 1].0;
    for p in pts.iter().rev() {
        acc += p.1;
        if acc > 1e-18 * total {
            hi = p.0;
            break;
        }
    }
    (lo, hi)
}

/// Free sojourn times `T_r^0` in `[-r, r]`.
pub fn sojourn_free(
    packet: &ChannelWavepacket,
    radii: &[f64],
    opts: &FreeOptions,
    exec: Execution,
) -> Result<TimeIntegral> {
    FreeOccupation::from_packet(packet, radii, opts, exec)?.integrate(None, None, opts, exec)
}

/// Integrals over `(-inf, 0]` and `[0, inf)`.
pub fn half_line_integrals(occ: &FreeOccupation, opts: &FreeOptions, exec: Execution) -> Result<(TimeIntegral, TimeIntegral)> {
    Ok((occ.integrate(None, Some(0.0), opts, exec)?, occ.integrate(Some(0.0), None, opts, exec)?))
}

/// Sum of the two half-line integrals.
pub fn whole_line(halves: &(TimeIntegral, TimeIntegral)) -> TimeIntegral {
    let (a, b) = halves;
    TimeIntegral {
        radii: a.radii.clone(),
        values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
        tail_bound: a.tail_bound + b.tail_bound,
        quadrature_error: a.quadrature_error + b.quadrature_error,
        evaluations: a.evaluations + b.evaluations,
    }
}

/// Free delay `1/2 { int_{-inf}^0 (P_r[phi] - P_r[S phi]) + int_0^inf (P_r[S phi] - P_r[phi]) }`
/// from the half-line integrals of both packets.
pub fn free_delay_from(incoming: &(TimeIntegral, TimeIntegral), scattered: &(TimeIntegral, TimeIntegral)) -> Vec<f64> {
    let ((a_minus, a_plus), (s_minus, s_plus)) = (incoming, scattered);
    (0..a_minus.values.len())
        .map(|i| 0.5 * ((a_minus.values[i] - s_minus.values[i]) + (s_plus.values[i] - a_plus.values[i])))
        .collect()
}

/// Free delay of `packet` and its scattered image.
pub fn tau_free(
    packet: &ChannelWavepacket,
    scattered: &ChannelWavepacket,
    radii: &[f64],
    opts: &FreeOptions,
    exec: Execution,
) -> Result<Vec<f64>> {
    let before = FreeOccupation::from_packet(packet, radii, opts, exec)?;
    let after = FreeOccupation::from_packet(scattered, radii, opts, exec)?;
    Ok(free_delay_from(
        &half_line_integrals(&before, opts, exec)?,
        &half_line_integrals(&after, opts, exec)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{free_gaussian_sojourn, GaussianPacket};
    use crate::spectral::{MomentumProfile, PacketSpec};

    fn packet(center: f64, width: f64, position: f64) -> ChannelWavepacket {
        ChannelWavepacket::from_specs(
            &[PacketSpec {
                channel: 1,
                profile: MomentumProfile::Gaussian { center, width },
                position,
                weight: 1.0,
                phase: 0.0,
            }],
            2e-3,
        )
        .unwrap()
    }

    #[test]
    fn matches_gaussian_oracle() {
        let p = packet(2.0, 0.15, -3.0);
        let radii = [5.0, 12.0];
        let t = sojourn_free(&p, &radii, &FreeOptions::default(), Execution::default()).unwrap();
        for (r, v) in radii.iter().zip(&t.values) {
            let o = free_gaussian_sojourn(&GaussianPacket { center: 2.0, width: 0.15, position: -3.0 }, *r).unwrap();
            assert!((v - o.value).abs() < 1e-8, "r = {r}: {v} vs {}", o.value);
        }
    }

    #[test]
    fn free_delay_of_identity_vanishes() {
        let p = packet(2.5, 0.2, 1.0);
        let tau = tau_free(&p, &p, &[4.0, 8.0], &FreeOptions::default(), Execution::default()).unwrap();
        assert!(tau.iter().all(|t| t.abs() < 1e-12));
    }
}
