//! Closed-form reference solutions: the one-dimensional square well and the
//! freely spreading Gaussian packet.

use num_complex::Complex64;
use quadrature::double_exponential;

use crate::{Error, Result};

/// Potential `-depth` on `|x| < half_width` (a barrier when `depth < 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareWell {
    pub depth: f64,
    pub half_width: f64,
}

/// Scattering data of a [`SquareWell`] at momentum `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareWellAmplitudes {
    pub transmission: Complex64,
    pub reflection: Complex64,
    /// Phase shift of the even partial wave (valid for wells and for barriers below the top).
    pub even_phase: f64,
    pub odd_phase: f64,
}

/// Energy derivatives of the partial-wave phase shifts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDelay {
    /// `d(delta_even)/d(lambda)`
    pub even: f64,
    /// `d(delta_odd)/d(lambda)`
    pub odd: f64,
}

impl PhaseDelay {
    /// Diagonal transmission-direction entry of the delay matrix.
    pub fn diagonal(&self) -> f64 {
        self.even + self.odd
    }
}

/// Transmission and reflection amplitudes with plane waves referred to the well centre.
pub fn square_well_1d(well: &SquareWell, k: f64) -> SquareWellAmplitudes {
    let a = well.half_width;
    let q = Complex64::new(k * k + well.depth, 0.0).sqrt();
    let i = Complex64::i();
    let kc = Complex64::new(k, 0.0);
    let arg = q * 2.0 * a;
    let denom = arg.cos() - i * (kc * kc + q * q) / (kc * q * 2.0) * arg.sin();
    let t = (-i * 2.0 * k * a).exp() / denom;
    let r = i * arg.sin() * (q * q - kc * kc) / (kc * q * 2.0) * t;
    let (even_phase, odd_phase) = if k * k + well.depth > 0.0 {
        let q = q.re;
        (
            (q * (q * a).sin()).atan2(k * (q * a).cos()) - k * a,
            (k * (q * a).sin()).atan2(q * (q * a).cos()) - k * a,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    SquareWellAmplitudes {
        transmission: t,
        reflection: r,
        even_phase,
        odd_phase,
    }
}

/// Energy derivatives of the phase shifts at channel momentum `k`
/// (energy measured from the channel threshold, `lambda = k^2 + const`).
pub fn analytic_phase_delay(well: &SquareWell, k: f64) -> Result<PhaseDelay> {
    if !(k > 0.0) || k * k + well.depth <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "phase delays need 0 < k and k^2 > -depth, got k = {k}"
        )));
    }
    let a = well.half_width;
    let q = (k * k + well.depth).sqrt();
    let dq = k / q;
    let (s, c) = (q * a).sin_cos();
    let slope = |n: f64, d: f64, dn: f64, dd: f64| (dn * d - n * dd) / (n * n + d * d);
    let even = slope(q * s, k * c, dq * (s + q * a * c), c - k * a * s * dq) - a;
    let odd = slope(k * s, q * c, s + k * a * c * dq, dq * c - q * a * s * dq) - a;
    // d/dlambda = (1 / 2k) d/dk
    Ok(PhaseDelay {
        even: even / (2.0 * k),
        odd: odd / (2.0 * k),
    })
}

/// Gaussian momentum profile `exp(-(xi - center)^2 / (4 width^2)) e^{-i xi position}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPacket {
    pub center: f64,
    pub width: f64,
    pub position: f64,
}

impl GaussianPacket {
    /// Normalised position density at time `t`.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        let var = 0.25 / (self.width * self.width) + 4.0 * self.width * self.width * t * t;
        let d = x - self.position - 2.0 * self.center * t;
        (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }
}

/// Sojourn time in `[-r, r]` with its quadrature error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSojourn {
    pub value: f64,
    pub error_estimate: f64,
}

/// Free sojourn time of a Gaussian packet in `[-r, r]` by nested
/// double-exponential quadrature of the closed-form density.
pub fn free_gaussian_sojourn(packet: &GaussianPacket, r: f64) -> Result<OracleSojourn> {
    let ratio = packet.center.abs() / packet.width;
    // |g(0)| / peak = exp(-ratio^2 / 4)
    if !(packet.width > 0.0) || ratio * ratio / 4.0 < 12.0 * std::f64::consts::LN_10 {
        return Err(Error::Admissibility(format!(
            "Gaussian packet with center {} and width {} has non-negligible weight at zero momentum",
            packet.center, packet.width
        )));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let v = 2.0 * packet.center.abs();
    let sigma = |t: f64| (0.25 / (packet.width * packet.width) + 4.0 * packet.width * packet.width * t * t).sqrt();
    let margin = 12f64.min(0.9 * ratio);
    // first |t| at which the packet centre is `margin` widths outside [-r, r]
    let mut horizon = (r + packet.position.abs()) / v + 1.0;
    while (v * horizon - packet.position.abs() - r) / sigma(horizon) < margin {
        horizon *= 1.25;
    }
    let inner = |t: f64| {
        double_exponential::integrate(|x| packet.density(x, t), -r, r, 1e-15)
    };
    let pieces = 64;
    let h = 2.0 * horizon / pieces as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    for p in 0..pieces {
        let a = -horizon + p as f64 * h;
        let out = double_exponential::integrate(|t| inner(t).integral, a, a + h, 1e-14);
        value += out.integral;
        error += out.error_estimate;
    }
    Ok(OracleSojourn {
        value,
        error_estimate: error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_well_flux_and_parity_form() {
        let w = SquareWell { depth: 5.0, half_width: 1.0 };
        for k in [0.3, 1.0, 2.2, 3.7] {
            let s = square_well_1d(&w, k);
            assert!((s.transmission.norm_sqr() + s.reflection.norm_sqr() - 1.0).abs() < 1e-13);
            let e = Complex64::from_polar(1.0, 2.0 * s.even_phase);
            let o = Complex64::from_polar(1.0, 2.0 * s.odd_phase);
            assert!((s.transmission - (e + o) / 2.0).norm() < 1e-12);
            assert!((s.reflection - (e - o) / 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn barrier_below_top_is_unitary() {
        let w = SquareWell { depth: -6.0, half_width: 0.5 };
        let s = square_well_1d(&w, 1.5);
        assert!((s.transmission.norm_sqr() + s.reflection.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_delay_matches_difference_quotient() {
        let w = SquareWell { depth: 3.0, half_width: 1.0 };
        let k: f64 = 1.7;
        let h = 1e-5;
        let lam = k * k;
        let at = |l: f64| square_well_1d(&w, l.sqrt());
        let (p, m) = (at(lam + h), at(lam - h));
        let d = analytic_phase_delay(&w, k).unwrap();
        assert!(((p.even_phase - m.even_phase) / (2.0 * h) - d.even).abs() < 1e-8);
        assert!(((p.odd_phase - m.odd_phase) / (2.0 * h) - d.odd).abs() < 1e-8);
    }

    #[test]
    fn transmission_resonance() {
        // 2 q a = n pi gives |t| = 1
        let a = 1.0;
        let depth = 4.0;
        let q = std::f64::consts::PI;
        let k = (q * q - depth).sqrt();
        let s = square_well_1d(&SquareWell { depth, half_width: a }, k);
        assert!((s.transmission.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sojourn_grows_ballistically() {
        let p = GaussianPacket { center: 2.0, width: 0.13, position: 0.0 };
        let t1 = free_gaussian_sojourn(&p, 40.0).unwrap().value;
        let t2 = free_gaussian_sojourn(&p, 50.0).unwrap().value;
        let slope = (t2 - t1) / 10.0;
        assert!((slope * p.center - 1.0).abs() < 0.01, "slope {slope}");
    }

    #[test]
    fn gaussian_oracle_rejects_slow_packets() {
        let p = GaussianPacket { center: 0.5, width: 0.3, position: 0.0 };
        assert!(matches!(free_gaussian_sojourn(&p, 5.0), Err(Error::Admissibility(_))));
    }
}
