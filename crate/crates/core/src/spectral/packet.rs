use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::diff::derivative_complex;
use crate::numerics::interp::interpolate_complex;
use crate::numerics::quad::CompensatedSum;
use crate::waveguide::TransverseBasis;
use crate::{Error, Result};

/// Relative amplitude below which packet samples count as vanished.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// Shape of a packet in longitudinal momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentumProfile {
    /// `exp(-(xi - center)^2 / (4 width^2))`; `width` is the momentum spread of `|g|^2`.
    Gaussian { center: f64, width: f64 },
    /// Smooth bump `exp(1 - 1 / (1 - u^2))` with `u = (xi - center) / half_width`.
    Bump { center: f64, half_width: f64 },
}

impl MomentumProfile {
    pub fn eval(&self, xi: f64) -> f64 {
        match *self {
            MomentumProfile::Gaussian { center, width } => {
                let u = xi - center;
                (-u * u / (4.0 * width * width)).exp()
            }
            MomentumProfile::Bump { center, half_width } => {
                let u = (xi - center) / half_width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
        }
    }

    /// Momentum interval outside which the profile is below `cutoff` of its peak.
    pub fn support(&self, cutoff: f64) -> (f64, f64) {
        match *self {
            MomentumProfile::Gaussian { center, width } => {
                let d = 2.0 * width * (1.0 / cutoff).ln().sqrt();
                (center - d, center + d)
            }
            MomentumProfile::Bump { center, half_width } => (center - half_width, center + half_width),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MomentumProfile::Gaussian { center, width } => center.is_finite() && width.is_finite() && width > 0.0,
            MomentumProfile::Bump { center, half_width } => {
                center.is_finite() && half_width.is_finite() && half_width > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid momentum profile {self:?}")))
        }
    }
}

/// One channel's contribution to an initial packet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    /// One-based channel label.
    pub channel: usize,
    pub profile: MomentumProfile,
    /// Position of the packet centre at time zero.
    #[serde(default)]
    pub position: f64,
    /// Relative amplitude before overall normalisation.
    #[serde(default = "unit")]
    pub weight: f64,
    #[serde(default)]
    pub phase: f64,
}

fn unit() -> f64 {
    1.0
}

/// Momentum samples of one channel on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PacketComponent {
    /// Zero-based channel index.
    pub channel: usize,
    pub xi_start: f64,
    pub xi_step: f64,
    pub samples: Vec<Complex64>,
}

impl PacketComponent {
    pub fn xi(&self, i: usize) -> f64 {
        self.xi_start + i as f64 * self.xi_step
    }

    pub fn xi_end(&self) -> f64 {
        self.xi(self.samples.len().saturating_sub(1))
    }

    pub fn value_at(&self, xi: f64, points: usize) -> Complex64 {
        interpolate_complex(&self.samples, self.xi_start, self.xi_step, xi, points)
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for z in &self.samples {
            s.add(z.norm_sqr());
        }
        s.value() * self.xi_step
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Position mean and variance from `x = i d/dxi`.
    pub fn position_moments(&self) -> (f64, f64) {
        let d = derivative_complex(&self.samples, self.xi_step, 4).unwrap_or_default();
        let norm = self.norm_sqr();
        if norm == 0.0 || d.is_empty() {
            return (0.0, 0.0);
        }
        let mut mean = 0.0;
        let mut second = 0.0;
        for (g, dg) in self.samples.iter().zip(&d) {
            mean += (g.conj() * Complex64::i() * dg).re;
            second += dg.norm_sqr();
        }
        let mean = mean * self.xi_step / norm;
        let second = second * self.xi_step / norm;
        (mean, (second - mean * mean).max(0.0))
    }
}

/// Initial data in channel momentum representation: for each channel the
/// Fourier transform of the longitudinal wave function.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ChannelWavepacket {
    pub components: Vec<PacketComponent>,
}

impl ChannelWavepacket {
    /// Builds a normalised packet from profile specifications sampled with spacing `xi_step`.
    pub fn from_specs(specs: &[PacketSpec], xi_step: f64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument("a packet needs at least one component".into()));
        }
        if !(xi_step > 0.0) {
            return Err(Error::InvalidArgument("momentum step must be positive".into()));
        }
        let mut components: Vec<PacketComponent> = Vec::new();
        for spec in specs {
            spec.profile.validate()?;
            if spec.channel == 0 {
                return Err(Error::InvalidArgument("channel labels start at 1".into()));
            }
            let channel = spec.channel - 1;
            if components.iter().any(|c| c.channel == channel) {
                return Err(Error::InvalidArgument(format!(
                    "channel {} appears in more than one packet component",
                    spec.channel
                )));
            }
            let (lo, hi) = spec.profile.support(SUPPORT_CUTOFF);
            let first = (lo / xi_step).floor() as i64;
            let last = (hi / xi_step).ceil() as i64;
            let samples = (first..=last)
                .map(|m| {
                    let xi = m as f64 * xi_step;
                    Complex64::from_polar(spec.weight * spec.profile.eval(xi), spec.phase - xi * spec.position)
                })
                .collect();
            components.push(PacketComponent {
                channel,
                xi_start: first as f64 * xi_step,
                xi_step,
                samples,
            });
        }
        components.sort_by_key(|c| c.channel);
        let mut packet = Self { components };
        let norm = packet.norm_sqr().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("packet has zero norm".into()));
        }
        packet.scale(1.0 / norm);
        Ok(packet)
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.components {
            for z in &mut c.samples {
                *z *= factor;
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn component(&self, channel: usize) -> Option<&PacketComponent> {
        self.components.iter().find(|c| c.channel == channel)
    }

    fn global_peak(&self) -> f64 {
        self.components.iter().map(|c| c.peak()).fold(0.0, f64::max)
    }

    /// Smallest and largest `|xi|` among significant samples.
    pub fn momentum_range(&self) -> (f64, f64) {
        let level = SUPPORT_CUTOFF * self.global_peak();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for c in &self.components {
            for (i, z) in c.samples.iter().enumerate() {
                if z.norm() >= level {
                    lo = lo.min(c.xi(i).abs());
                    hi = hi.max(c.xi(i).abs());
                }
            }
        }
        (lo, hi)
    }

    /// Energy interval spanned by significant samples.
    pub fn energy_support(&self, basis: &TransverseBasis) -> Result<(f64, f64)> {
        let level = SUPPORT_CUTOFF * self.global_peak();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.components {
            if c.channel >= basis.mode_count() {
                return Err(Error::InvalidArgument(format!(
                    "packet occupies channel {} beyond the {} modes of the basis",
                    c.channel + 1,
                    basis.mode_count()
                )));
            }
            let nu = basis.threshold(c.channel);
            for (i, z) in c.samples.iter().enumerate() {
                if z.norm() >= level {
                    let e = c.xi(i).powi(2) + nu;
                    lo = lo.min(e);
                    hi = hi.max(e);
                }
            }
        }
        if !lo.is_finite() {
            return Err(Error::InvalidArgument("packet has no significant samples".into()));
        }
        Ok((lo, hi))
    }

    /// Checks that the packet avoids zero momentum and lies inside one
    /// inter-threshold interval, at least `window` away from the thresholds.
    pub fn validate(&self, basis: &TransverseBasis, window: f64) -> Result<()> {
        let peak = self.global_peak();
        let xi_floor = window.sqrt();
        for c in &self.components {
            for (i, z) in c.samples.iter().enumerate() {
                if c.xi(i).abs() < xi_floor && z.norm() >= SUPPORT_CUTOFF * peak {
                    return Err(Error::Admissibility(format!(
                        "channel {} has weight {:.3e} at momentum {:.3e}, too close to zero",
                        c.channel + 1,
                        z.norm() / peak,
                        c.xi(i)
                    )));
                }
            }
        }
        let (lo, hi) = self.energy_support(basis)?;
        let interval = basis.interval_of(lo);
        if basis.interval_of(hi) != interval {
            return Err(Error::Admissibility(format!(
                "energy support [{lo}, {hi}] straddles a threshold"
            )));
        }
        if lo - interval.0 < window || interval.1 - hi < window {
            return Err(Error::Admissibility(format!(
                "energy support [{lo}, {hi}] comes within {window:e} of a threshold"
            )));
        }
        Ok(())
    }

    /// Free evolution `e^{-i t H_0}`.
    pub fn free_evolve(&self, basis: &TransverseBasis, t: f64) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| {
                let nu = basis.threshold(c.channel);
                let samples = c
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z * Complex64::from_polar(1.0, -t * (c.xi(i).powi(2) + nu)))
                    .collect();
                PacketComponent { samples, ..c.clone() }
            })
            .collect();
        Self { components }
    }

    /// Removes leading and trailing samples below `cutoff` times the global peak.
    pub fn trimmed(&self, cutoff: f64) -> Self {
        let level = cutoff * self.global_peak();
        let components = self
            .components
            .iter()
            .filter_map(|c| {
                let first = c.samples.iter().position(|z| z.norm() > level)?;
                let last = c.samples.iter().rposition(|z| z.norm() > level)?;
                Some(PacketComponent {
                    channel: c.channel,
                    xi_start: c.xi(first),
                    xi_step: c.xi_step,
                    samples: c.samples[first..=last].to_vec(),
                })
            })
            .collect();
        Self { components }
    }

    /// Overall position mean and spread.
    pub fn position_moments(&self) -> (f64, f64) {
        let total = self.norm_sqr();
        if total == 0.0 {
            return (0.0, 0.0);
        }
        let mut mean = 0.0;
        let mut second = 0.0;
        for c in &self.components {
            let w = c.norm_sqr() / total;
            let (m, v) = c.position_moments();
            mean += w * m;
            second += w * (v + m * m);
        }
        (mean, (second - mean * mean).max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn gaussian(center: f64, width: f64, position: f64) -> ChannelWavepacket {
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
    fn normalised_with_expected_moments() {
        let p = gaussian(2.0, 0.13, -5.0);
        assert!((p.norm_sqr() - 1.0).abs() < 1e-14);
        let (mean, spread) = p.position_moments();
        assert!((mean + 5.0).abs() < 1e-7, "mean {mean}");
        assert!((spread - 1.0 / (2.0 * 0.13)).abs() < 1e-6, "spread {spread}");
    }

    #[test]
    fn admissibility() {
        let basis = TransverseBasis::new(PI / 2.0, 4).unwrap();
        assert!(gaussian(2.0, 0.13, 0.0).validate(&basis, 4e-3).is_ok());
        assert!(matches!(gaussian(0.3, 0.2, 0.0).validate(&basis, 4e-3), Err(Error::Admissibility(_))));
        // support straddles the second threshold at lambda = 16
        assert!(matches!(gaussian(3.4, 0.2, 0.0).validate(&basis, 4e-3), Err(Error::Admissibility(_))));
    }

    #[test]
    fn free_evolution_conserves_norm_and_energy_support() {
        let basis = TransverseBasis::new(PI / 2.0, 4).unwrap();
        let p = gaussian(2.0, 0.13, 0.0);
        let q = p.free_evolve(&basis, 7.3);
        assert!((q.norm_sqr() - 1.0).abs() < 1e-13);
        assert_eq!(p.energy_support(&basis).unwrap(), q.energy_support(&basis).unwrap());
    }

    proptest! {
        #[test]
        fn free_evolution_is_a_group(t1 in -20.0f64..20.0, t2 in -20.0f64..20.0) {
            let basis = TransverseBasis::new(1.0, 2).unwrap();
            let p = gaussian(3.0, 0.2, 1.0);
            let a = p.free_evolve(&basis, t1).free_evolve(&basis, t2);
            let b = p.free_evolve(&basis, t1 + t2);
            let err = a.components[0].samples.iter().zip(&b.components[0].samples)
                .map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12);
        }
    }
}
