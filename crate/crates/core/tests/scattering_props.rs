use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use wgdelay::numerics::diff::Stencil;
use wgdelay::scattering::*;
use wgdelay::spectral::{channel_resolved_delay, ew_expectation, fiber_grid_for, forward_transform, ChannelWavepacket, MomentumProfile, PacketSpec, SpectralOptions};
use wgdelay::waveguide::*;
use wgdelay::scenario::Scenario;
use wgdelay::Execution;

fn bump(amplitude: f64, center_y: f64, center_x: f64) -> PotentialSpec {
    PotentialSpec::Separable(SeparableTerm {
        transverse: TransverseProfile::GaussianBump { amplitude: 1.0, center: center_y, width: 0.2 },
        longitudinal: LongitudinalProfile::Gaussian { amplitude, width: 1.0, center: center_x },
    })
}

fn coupling(spec: &PotentialSpec, basis: &TransverseBasis, dx: f64) -> CouplingMatrix {
    compute_coupling(spec, basis, &XGrid::symmetric(12.0, dx).unwrap(), 64).unwrap()
}

/// Swaps the two directions inside every channel.
fn mirror(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    let p = |i: usize| i ^ 1;
    DMatrix::from_fn(n, n, |i, j| m[(p(i), p(j))])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unitary_and_reciprocal(g in -12.0f64..12.0, y in 0.2f64..1.3, x in -1.0f64..1.0, e in 17.0f64..35.0) {
        let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
        let c = coupling(&bump(g, y, x), &basis, 0.05);
        let s = solve_smatrix(&c, &basis, e, &SolverOptions::default()).unwrap();
        prop_assert!(s.unitarity_residual() <= 1e-6, "unitarity {:e}", s.unitarity_residual());
        prop_assert!(s.reciprocity_residual() <= 1e-6, "reciprocity {:e}", s.reciprocity_residual());
    }

    /// Reflecting the potential in x relabels the directions of every channel.
    #[test]
    fn mirror_covariance(g in -10.0f64..10.0, x in 0.2f64..1.5, e in 17.0f64..35.0) {
        let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
        let opts = SolverOptions::default();
        let a = solve_smatrix(&coupling(&bump(g, 0.5, x), &basis, 0.05), &basis, e, &opts).unwrap();
        let b = solve_smatrix(&coupling(&bump(g, 0.5, -x), &basis, 0.05), &basis, e, &opts).unwrap();
        let diff = (mirror(a.matrix()) - b.matrix()).norm();
        prop_assert!(diff < 1e-8, "mirror defect {diff:e}");
    }
}

#[test]
fn delay_matrix_is_mirror_covariant() {
    let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
    let opts = SolverOptions::default();
    let sweep = |x: f64| {
        let s = compute_sweep(&coupling(&bump(8.0, 0.5, x), &basis, 0.05), &basis, 20.0, 22.0, 41, &opts, Execution::default()).unwrap();
        ew_delay(&s, Stencil::Fourth).unwrap()
    };
    let (a, b) = (sweep(0.7), sweep(-0.7));
    for (ta, tb) in a.segments[0].tau.iter().zip(&b.segments[0].tau) {
        assert!((mirror(ta) - tb).norm() < 1e-6);
    }
}

#[test]
fn refinement_is_cauchy_at_acceptance_settings() {
    for name in ["square_well", "two_channel"] {
        let sc = Scenario::builtin(name).unwrap();
        let basis = sc.basis().unwrap();
        let (lo, hi, _) = sc.sweep_range(&basis).unwrap();
        let opts = sc.solver.options.clone();
        let coarse = sc.coupling(&basis).unwrap();
        let wide = TransverseBasis::new(sc.waveguide.width, sc.waveguide.modes + 2).unwrap();
        let grid = XGrid::symmetric(sc.solver_extent(), sc.solver.dx / 2.0).unwrap();
        let fine = compute_coupling(&sc.potential, &wide, &grid, sc.solver.quadrature_order).unwrap();
        let more = SolverOptions { closed_channels: opts.closed_channels + 2, ..opts.clone() };
        for k in 0..=4 {
            let e = lo + (hi - lo) * k as f64 / 4.0;
            let a = solve_smatrix(&coarse, &basis, e, &opts).unwrap();
            let b = solve_smatrix(&fine, &wide, e, &more).unwrap();
            let d = (a.matrix() - b.matrix()).norm();
            assert!(d <= 1e-6, "{name}: refinement changes S by {d:e} at {e}");
        }
    }
}

#[test]
fn more_closed_channels_change_less() {
    let basis = TransverseBasis::new(PI / 2.0, 10).unwrap();
    let c = coupling(&bump(10.0, 0.5, 0.0), &basis, 0.05);
    let s = |n: usize| solve_smatrix(&c, &basis, 25.0, &SolverOptions { closed_channels: n, ..Default::default() }).unwrap();
    let (s1, s2, s4, s8) = (s(1), s(2), s(4), s(8));
    let d12 = (s1.matrix() - s2.matrix()).norm();
    let d48 = (s4.matrix() - s8.matrix()).norm();
    assert!(d48 < d12, "{d48:e} vs {d12:e}");
}

#[test]
fn born_residual_is_second_order() {
    let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
    let spec = PotentialSpec::Separable(SeparableTerm {
        transverse: TransverseProfile::Constant { value: 1.0 },
        longitudinal: LongitudinalProfile::Sech2 { amplitude: 1.0, width: 0.7, center: 0.3 },
    });
    let dev = |g: f64| {
        let c = coupling(&spec.scaled(g), &basis, 0.02);
        let s = solve_smatrix(&c, &basis, 9.0, &SolverOptions::default()).unwrap();
        let b = born_smatrix(&c, &basis, 9.0).unwrap();
        (s.matrix() - b.matrix()).norm()
    };
    let ratio = dev(0.2) / dev(0.1);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn blocks_reassemble_and_vanish_when_closed() {
    let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
    let c = coupling(&bump(10.0, 0.5, 0.0), &basis, 0.05);
    let sweep = compute_sweep(&c, &basis, 10.0, 20.0, 30, &SolverOptions::default(), Execution::default()).unwrap();
    let blocks: Vec<Vec<_>> = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| partial_smatrix(&sweep, a, b)).collect();
    for (k, s) in sweep.iter().enumerate() {
        let n = s.open_count();
        let mut full = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for from in 0..2 {
            for to in 0..2 {
                let (_, b) = blocks[from * 2 + to][k];
                if from < n && to < n {
                    full.view_mut((2 * to, 2 * from), (2, 2)).copy_from(&b);
                } else {
                    assert_eq!(b.norm(), 0.0, "closed block at {}", s.energy());
                }
            }
        }
        assert_eq!(&full, s.matrix());
    }
}

#[test]
fn channel_resolved_delay_matches_full_expectation() {
    let basis = TransverseBasis::new(PI / 2.0, 6).unwrap();
    let c = coupling(&bump(-6.0, 0.4, 0.0), &basis, 0.05);
    let opts = SpectralOptions::default();
    for (channel, xi0) in [(1usize, 21f64.sqrt()), (2, 3.0)] {
        let packet = ChannelWavepacket::from_specs(
            &[PacketSpec { channel, profile: MomentumProfile::Gaussian { center: xi0, width: 0.06 }, position: 0.0, weight: 1.0, phase: 0.0 }],
            opts.xi_step,
        )
        .unwrap();
        let grid = fiber_grid_for(&packet, &basis, &opts).unwrap();
        let sweep = compute_sweep(&c, &basis, grid.start - 0.05, grid.end() + 0.05, 240, &SolverOptions::default(), Execution::default()).unwrap();
        let delay = ew_delay(&sweep, opts.stencil).unwrap();
        let fiber = forward_transform(&packet, &basis, grid, &opts).unwrap();
        let full = ew_expectation(&fiber, &delay, &opts).unwrap().value;
        let resolved = channel_resolved_delay(&fiber, &sweep, &delay, channel - 1, &opts).unwrap();
        assert!((resolved.re - full).abs() <= 1e-6 * full.abs(), "{} vs {full}", resolved.re);
    }
}
