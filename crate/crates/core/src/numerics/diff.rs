//! Finite-difference derivatives on uniform grids.

use num_complex::Complex64;

/// Formal accuracy order of a first-derivative stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    Second,
    Fourth,
}

impl Stencil {
    pub fn order(self) -> usize {
        match self {
            Stencil::Second => 2,
            Stencil::Fourth => 4,
        }
    }

    pub fn from_order(order: usize) -> Option<Self> {
        match order {
            2 => Some(Stencil::Second),
            4 => Some(Stencil::Fourth),
            _ => None,
        }
    }
}

/// Fornberg's weights for the first derivative at `z` from nodes `x`.
pub fn first_derivative_weights(z: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    // c[j][k]: weight of node j for derivative order k (k = 0, 1)
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Stencil of `order + 1` nodes for node `i` of `len`, centred where possible.
/// Returns the first index and the weights (already divided by `h`).
pub fn stencil_at(i: usize, len: usize, order: usize, h: f64) -> Option<(usize, Vec<f64>)> {
    let width = order + 1;
    if len < width {
        return None;
    }
    let first = (i as isize - (order / 2) as isize).clamp(0, (len - width) as isize) as usize;
    let nodes: Vec<f64> = (0..width).map(|k| (first + k) as f64).collect();
    let w = first_derivative_weights(i as f64, &nodes);
    Some((first, w.into_iter().map(|w| w / h).collect()))
}

/// First derivative of complex samples at every node.
pub fn derivative_complex(values: &[Complex64], h: f64, order: usize) -> Option<Vec<Complex64>> {
    let n = values.len();
    (0..n)
        .map(|i| {
            stencil_at(i, n, order, h).map(|(first, w)| {
                w.iter()
                    .enumerate()
                    .map(|(k, &wk)| values[first + k] * wk)
                    .sum()
            })
        })
        .collect()
}
