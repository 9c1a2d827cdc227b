use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::smatrix::{Direction, SMatrix};
use crate::numerics::quad::gauss_legendre;
use crate::waveguide::{open_channels, CouplingMatrix, TransverseBasis};
use crate::Result;

/// Unitary Fourier transforms `(2 pi)^{-1/2} int V_ba(x) e^{-i q x} dx` of the
/// open-open coupling block for every pair of waves.
fn transformed_coupling(coupling: &CouplingMatrix, momenta: &[f64], decay_cutoff: f64) -> Result<DMatrix<Complex64>> {
    let no = momenta.len();
    let dim = 2 * no;
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    let q = |row: usize, col: usize| {
        let (b, sb) = (row / 2, if row % 2 == 1 { 1.0 } else { -1.0 });
        let (a, sa) = (col / 2, if col % 2 == 1 { 1.0 } else { -1.0 });
        (b, a, sb * momenta[b] - sa * momenta[a])
    };
    let mut add = |x: f64, w: f64, v: &DMatrix<f64>| {
        for row in 0..dim {
            for col in 0..dim {
                let (b, a, qq) = q(row, col);
                let val = v[(b, a)];
                if val != 0.0 {
                    acc[(row, col)] += Complex64::from_polar(w * val, -qq * x);
                }
            }
        }
    };
    let grid = coupling.grid();
    if coupling.has_closed_form() {
        let radius = coupling.matching_radius(decay_cutoff)?;
        let m = (2.0 * radius / grid.step).round() as usize;
        let mut pts: Vec<f64> = (0..=m).map(|i| -radius + i as f64 * grid.step).collect();
        for &e in coupling.edges() {
            if e > -radius && e < radius {
                pts.push(e);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for cell in pts.windows(2) {
            let (xs, ws) = gauss_legendre(8, cell[0], cell[1]);
            for (x, w) in xs.into_iter().zip(ws) {
                add(x, w, &coupling.eval(x));
            }
        }
    } else {
        for j in 0..grid.len {
            add(grid.point(j), grid.step, &coupling.matrix_at(j));
        }
    }
    Ok(acc * Complex64::new((2.0 * PI).sqrt().recip(), 0.0))
}

/// First-order Born approximation of the scattering matrix.
pub fn born_smatrix(coupling: &CouplingMatrix, basis: &TransverseBasis, energy: f64) -> Result<SMatrix> {
    let open = open_channels(energy, basis, basis.default_threshold_window())?;
    if coupling.is_zero() {
        return Ok(SMatrix::identity(energy, open.momenta));
    }
    let k = &open.momenta;
    let vhat = transformed_coupling(coupling, k, 1e-12)?;
    let dim = 2 * k.len();
    let kernel = (2.0 * PI).sqrt().recip();
    let mut s = DMatrix::<Complex64>::identity(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            let scale = PI * kernel / (k[row / 2] * k[col / 2]).sqrt();
            s[(row, col)] -= Complex64::i() * scale * vhat[(row, col)];
        }
    }
    debug_assert_eq!(SMatrix::index(0, Direction::Right), 1);
    Ok(SMatrix::new(energy, open.momenta, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveguide::{compute_coupling, LongitudinalProfile, PotentialSpec, SeparableTerm, TransverseProfile, XGrid};

    #[test]
    fn box_born_amplitudes() {
        // single channel: t = 1 - (i/2k) int V, r = -(i/2k) int V e^{2ikx}
        let basis = TransverseBasis::new(PI / 2.0, 3).unwrap();
        let spec = PotentialSpec::Separable(SeparableTerm {
            transverse: TransverseProfile::Constant { value: 1.0 },
            longitudinal: LongitudinalProfile::Box { amplitude: 0.1, half_width: 1.0, center: 0.0 },
        });
        let c = compute_coupling(&spec, &basis, &XGrid::symmetric(3.0, 0.05).unwrap(), 64).unwrap();
        let energy = 8.0;
        let k = 2.0;
        let s = born_smatrix(&c, &basis, energy).unwrap();
        let t = Complex64::new(1.0, -0.1 * 2.0 / (2.0 * k));
        let r = Complex64::new(0.0, -0.1 / (2.0 * k)) * (2.0 * (2.0 * k).sin() / (2.0 * k));
        assert!((s.transmission(0, 0) - t).norm() < 1e-13);
        assert!((s.reflection(0, 0) - r).norm() < 1e-13);
    }
}
