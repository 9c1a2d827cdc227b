//! Lagrange interpolation on uniform grids.

use num_complex::Complex64;

/// Interpolation weights for `x` using `points` consecutive nodes of a uniform
/// grid with `len` nodes. Returns the first node index and the weights, or
/// `None` when `x` lies outside the grid.
pub fn lagrange_weights(
    start: f64,
    step: f64,
    len: usize,
    x: f64,
    points: usize,
) -> Option<(usize, Vec<f64>)> {
    if len == 0 {
        return None;
    }
    let s = (x - start) / step;
    let last = (len - 1) as f64;
    let slack = 1e-9;
    if s < -slack || s > last + slack {
        return None;
    }
    let points = points.min(len).max(1);
    let i = s.floor().max(0.0) as isize;
    let first = (i + 1 - (points / 2) as isize).clamp(0, (len - points) as isize) as usize;
    let u = s - first as f64;
    // exact node hit: avoid 0/0 style cancellation in the product form
    let nearest = u.round();
    if (u - nearest).abs() < 1e-13 && nearest >= 0.0 && (nearest as usize) < points {
        let mut w = vec![0.0; points];
        w[nearest as usize] = 1.0;
        return Some((first, w));
    }
    let mut w = vec![0.0; points];
    for (k, wk) in w.iter_mut().enumerate() {
        let mut p = 1.0;
        for m in 0..points {
            if m != k {
                p *= (u - m as f64) / (k as f64 - m as f64);
            }
        }
        *wk = p;
    }
    Some((first, w))
}

/// Interpolates complex samples on a uniform grid; zero outside the grid.
pub fn interpolate_complex(samples: &[Complex64], start: f64, step: f64, x: f64, points: usize) -> Complex64 {
    match lagrange_weights(start, step, samples.len(), x, points) {
        Some((first, w)) => w
            .iter()
            .enumerate()
            .map(|(k, &wk)| samples[first + k] * wk)
            .sum(),
        None => Complex64::new(0.0, 0.0),
    }
}

/// Interpolates real samples on a uniform grid; `None` outside the grid.
pub fn interpolate_real(samples: &[f64], start: f64, step: f64, x: f64, points: usize) -> Option<f64> {
    lagrange_weights(start, step, samples.len(), x, points)
        .map(|(first, w)| w.iter().enumerate().map(|(k, &wk)| samples[first + k] * wk).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hits_nodes_exactly() {
        let s: Vec<f64> = (0..10).map(|i| (i as f64).exp()).collect();
        for i in 0..10 {
            assert_eq!(interpolate_real(&s, 0.5, 0.25, 0.5 + 0.25 * i as f64, 4), Some(s[i]));
        }
    }

    #[test]
    fn outside_is_none() {
        let s = vec![1.0; 5];
        assert!(interpolate_real(&s, 0.0, 1.0, -0.1, 4).is_none());
        assert!(interpolate_real(&s, 0.0, 1.0, 4.1, 4).is_none());
    }

    proptest! {
        #[test]
        fn reproduces_polynomials(c in proptest::collection::vec(-2.0f64..2.0, 4), x in 0.0f64..3.0) {
            let p = |t: f64| c[0] + t * (c[1] + t * (c[2] + t * c[3]));
            let h = 0.1;
            let s: Vec<f64> = (0..31).map(|i| p(i as f64 * h)).collect();
            let v = interpolate_real(&s, 0.0, h, x, 4).unwrap();
            prop_assert!((v - p(x)).abs() < 1e-11);
        }
    }
}
