use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::exec::{map_range, Execution};
use crate::numerics::quad::CompensatedSum;
use crate::spectral::ChannelWavepacket;
use crate::waveguide::TransverseBasis;
use crate::{Error, Result};

/// Smallest even `m >= n` whose only prime factors are 2, 3 and 5.
pub fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Periodic grid `start + j * step`, `j < len`, with `len` even.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl PeriodicGrid {
    /// `[-extent, extent)` with `x = 0` on the grid.
    pub fn symmetric(extent: f64, step: f64) -> Result<Self> {
        if !(extent > 0.0 && step > 0.0) {
            return Err(Error::InvalidArgument("grid extent and step must be positive".into()));
        }
        let half = extent / step;
        let m = half.round();
        if (half - m).abs() > 1e-8 * half.max(1.0) || m < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "grid step {step} does not divide extent {extent}"
            )));
        }
        Ok(Self {
            start: -m * step,
            step,
            len: 2 * m as usize,
        })
    }

    pub fn x(&self, j: usize) -> f64 {
        self.start + j as f64 * self.step
    }

    pub fn extent(&self) -> f64 {
        -self.start
    }

    /// Angular wavenumber of FFT bin `m`.
    pub fn momentum(&self, m: usize) -> f64 {
        let n = self.len as i64;
        let k = if (m as i64) < n / 2 { m as i64 } else { m as i64 - n };
        2.0 * PI * k as f64 / (self.len as f64 * self.step)
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.len).map(|m| self.momentum(m)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.step
    }
}

/// Quadrature weights `w_j` with `sum_j w_j f(x_j) = int_{-r}^{r} f` exactly
/// for the trigonometric interpolant of `f` on a periodic grid.
#[derive(Clone, Debug)]
pub struct OccupationWeights {
    pub radii: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl OccupationWeights {
    pub fn new(grid: &PeriodicGrid, radii: &[f64]) -> Result<Self> {
        if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0) || r >= grid.extent()) {
            return Err(Error::InvalidArgument(format!(
                "radius {r} must be positive and inside the grid half-width {}",
                grid.extent()
            )));
        }
        let n = grid.len;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let weights = radii
            .iter()
            .map(|&r| {
                let mut a: Vec<Complex64> = (0..n)
                    .map(|m| {
                        let xi = grid.momentum(m);
                        let c = if m == 0 { 2.0 * r } else { 2.0 * (xi * r).sin() / xi };
                        if m == n / 2 {
                            Complex64::new(c * (xi * grid.start).cos(), 0.0)
                        } else {
                            Complex64::from_polar(c, -xi * grid.start)
                        }
                    })
                    .collect();
                fft.process(&mut a);
                a.iter().map(|z| z.re / n as f64).collect()
            })
            .collect();
        Ok(Self {
            radii: radii.to_vec(),
            weights,
        })
    }

    /// `int_{-r}^{r} density` for every radius.
    pub fn evaluate(&self, density: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let mut s = CompensatedSum::default();
                for (a, b) in w.iter().zip(density) {
                    s.add(a * b);
                }
                s.value()
            })
            .collect()
    }
}

/// Multichannel wave function on a periodic grid.
#[derive(Clone, Debug)]
pub struct GridState {
    pub grid: PeriodicGrid,
    /// Zero-based channel index of each stored component.
    pub channels: Vec<usize>,
    pub amplitudes: Vec<Vec<Complex64>>,
    pub time: f64,
}

impl GridState {
    pub fn density(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.grid.len];
        for amp in &self.amplitudes {
            for (dj, z) in d.iter_mut().zip(amp) {
                *dj += z.norm_sqr();
            }
        }
        d
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for v in self.density() {
            s.add(v);
        }
        s.value() * self.grid.step
    }

    /// Probability in the outer `fraction` of the grid on either side.
    pub fn edge_probability(&self, fraction: f64) -> f64 {
        edge_probability(&self.grid, &self.density(), fraction)
    }
}

pub(crate) fn edge_probability(grid: &PeriodicGrid, density: &[f64], fraction: f64) -> f64 {
    let cut = (1.0 - fraction) * grid.extent();
    density
        .iter()
        .enumerate()
        .filter(|(j, _)| grid.x(*j).abs() >= cut)
        .map(|(_, d)| d)
        .sum::<f64>()
        * grid.step
}

/// Evaluates `e^{-i t H_0} phi` on the grid nodes by direct summation over the
/// packet's momentum samples.
pub fn sample_packet(
    packet: &ChannelWavepacket,
    basis: &TransverseBasis,
    grid: &PeriodicGrid,
    channels: &[usize],
    t: f64,
    exec: Execution,
) -> Result<GridState> {
    let evolved = packet.free_evolve(basis, t);
    let mut amplitudes = Vec::with_capacity(channels.len());
    for &ch in channels {
        let amp = match evolved.component(ch) {
            None => vec![Complex64::new(0.0, 0.0); grid.len],
            Some(c) => {
                let scale = c.xi_step / (2.0 * PI).sqrt();
                let xs: Vec<f64> = (0..c.samples.len()).map(|i| c.xi(i)).collect();
                map_range(grid.len, exec, |j| {
                    let x = grid.x(j);
                    let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
                    for (g, &xi) in c.samples.iter().zip(&xs) {
                        let z = g * Complex64::from_polar(1.0, xi * x);
                        re.add(z.re);
                        im.add(z.im);
                    }
                    Complex64::new(re.value(), im.value()) * scale
                })
            }
        };
        amplitudes.push(amp);
    }
    if let Some(c) = packet.components.iter().find(|c| !channels.contains(&c.channel)) {
        return Err(Error::InvalidArgument(format!(
            "packet occupies channel {} which is not propagated",
            c.channel + 1
        )));
    }
    Ok(GridState {
        grid: *grid,
        channels: channels.to_vec(),
        amplitudes,
        time: t,
    })
}

/// Forward and inverse FFT plans for a grid length.
#[derive(Clone)]
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FftPair({})", self.forward.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friendly_sizes() {
        assert_eq!(fft_friendly(7), 8);
        assert_eq!(fft_friendly(3841), 3888);
        assert_eq!(fft_friendly(1), 2);
    }

    #[test]
    fn occupation_weights_integrate_gaussians() {
        let grid = PeriodicGrid::symmetric(30.0, 0.1).unwrap();
        let w = OccupationWeights::new(&grid, &[1.0, 2.5]).unwrap();
        let dens: Vec<f64> = (0..grid.len)
            .map(|j| (-(grid.x(j) - 0.3).powi(2)).exp() / PI.sqrt())
            .collect();
        let p = w.evaluate(&dens);
        let exact = |r: f64| {
            // int_{-r}^{r} exp(-(x-0.3)^2)/sqrt(pi) via a fine trapezoid
            let n = 200_000;
            let h = 2.0 * r / n as f64;
            (0..=n)
                .map(|i| {
                    let x = -r + i as f64 * h;
                    let c = if i == 0 || i == n { 0.5 } else { 1.0 };
                    c * (-(x - 0.3f64).powi(2)).exp() / PI.sqrt()
                })
                .sum::<f64>()
                * h
        };
        assert!((p[0] - exact(1.0)).abs() < 1e-10, "{} {}", p[0], exact(1.0));
        assert!((p[1] - exact(2.5)).abs() < 1e-10);
    }
}
