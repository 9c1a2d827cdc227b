use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

/// Direction of propagation of a channel wave.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Moving towards `x = -inf`.
    Left,
    /// Moving towards `x = +inf`.
    Right,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Left => -1.0,
            Direction::Right => 1.0,
        }
    }
}

/// On-shell scattering matrix at one energy.
///
/// Rows and columns are indexed by `(channel, direction)` over the open
/// channels, in the order `(0, Left), (0, Right), (1, Left), ...`. Column
/// `(a, d)` is the outgoing response to a unit-flux incoming wave in channel
/// `a` moving in direction `d`; row `(b, Right)` holds waves leaving to the
/// right, row `(b, Left)` waves leaving to the left. Plane waves are referred
/// to the origin of the longitudinal coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct SMatrix {
    energy: f64,
    momenta: Vec<f64>,
    matrix: DMatrix<Complex64>,
}

impl SMatrix {
    pub fn new(energy: f64, momenta: Vec<f64>, matrix: DMatrix<Complex64>) -> Self {
        assert_eq!(matrix.nrows(), 2 * momenta.len());
        assert_eq!(matrix.ncols(), 2 * momenta.len());
        Self { energy, momenta, matrix }
    }

    pub fn identity(energy: f64, momenta: Vec<f64>) -> Self {
        let n = 2 * momenta.len();
        Self::new(energy, momenta, DMatrix::identity(n, n))
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn open_count(&self) -> usize {
        self.momenta.len()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn index(channel: usize, direction: Direction) -> usize {
        2 * channel
            + match direction {
                Direction::Left => 0,
                Direction::Right => 1,
            }
    }

    pub fn entry(&self, out: (usize, Direction), inc: (usize, Direction)) -> Complex64 {
        self.matrix[(Self::index(out.0, out.1), Self::index(inc.0, inc.1))]
    }

    /// Transmission amplitude from channel `from` to channel `to` for waves incident from the left.
    pub fn transmission(&self, to: usize, from: usize) -> Complex64 {
        self.entry((to, Direction::Right), (from, Direction::Right))
    }

    /// Reflection amplitude from channel `from` to channel `to` for waves incident from the left.
    pub fn reflection(&self, to: usize, from: usize) -> Complex64 {
        self.entry((to, Direction::Left), (from, Direction::Right))
    }

    /// The 2x2 block coupling incoming channel `from` to outgoing channel `to`.
    pub fn block(&self, to: usize, from: usize) -> Matrix2<Complex64> {
        self.matrix.fixed_view::<2, 2>(2 * to, 2 * from).into_owned()
    }

    /// Frobenius norm of `S* S - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.matrix.nrows();
        (self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(n, n)).norm()
    }

    /// Frobenius norm of `S - P S^T P`, where `P` swaps the two directions of every channel.
    pub fn reciprocity_residual(&self) -> f64 {
        let n = self.matrix.nrows();
        let flip = |i: usize| i ^ 1;
        let mut sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                sq += (self.matrix[(i, j)] - self.matrix[(flip(j), flip(i))]).norm_sqr();
            }
        }
        sq.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_unitary_and_reciprocal() {
        let s = SMatrix::identity(5.0, vec![1.0, 2.0]);
        assert_eq!(s.unitarity_residual(), 0.0);
        assert_eq!(s.reciprocity_residual(), 0.0);
        assert_eq!(s.transmission(1, 1), Complex64::new(1.0, 0.0));
        assert_eq!(s.reflection(0, 0), Complex64::new(0.0, 0.0));
    }
}
