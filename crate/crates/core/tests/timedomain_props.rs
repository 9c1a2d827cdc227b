use proptest::prelude::*;
use wgdelay::error::Error;
use wgdelay::oracles::{free_gaussian_sojourn, GaussianPacket};
use wgdelay::scenario::Scenario;
use wgdelay::spectral::{ChannelWavepacket, MomentumProfile, PacketSpec};
use wgdelay::timedomain::*;
use wgdelay::Execution;

fn single(center: f64, width: f64, position: f64) -> ChannelWavepacket {
    let spec = PacketSpec { channel: 1, profile: MomentumProfile::Gaussian { center, width }, position, weight: 1.0, phase: 0.0 };
    ChannelWavepacket::from_specs(&[spec], 2e-3).unwrap()
}

fn free_sojourn(packet: &ChannelWavepacket, radii: &[f64]) -> Vec<f64> {
    sojourn_free(packet, radii, &FreeOptions::default(), Execution::default()).unwrap().values
}

#[test]
fn free_sojourn_matches_closed_form_density() {
    let (center, width, position) = (2.0, 0.13, -1.5);
    let radii = [0.5, 2.0, 8.0, 24.0];
    let values = free_sojourn(&single(center, width, position), &radii);
    let oracle = GaussianPacket { center, width, position };
    for (&r, &v) in radii.iter().zip(&values) {
        let o = free_gaussian_sojourn(&oracle, r).unwrap();
        assert!((v - o.value).abs() <= 1e-6 * o.value, "r = {r}: {v} vs {}", o.value);
    }
}

#[test]
fn free_sojourn_grows_like_length_over_speed() {
    // the interval [-r, r] has length 2r and the group velocity is 2 xi0
    let center = 2.5;
    let values = free_sojourn(&single(center, 0.1, 0.0), &[40.0, 80.0]);
    let slope = (values[1] - values[0]) / 40.0;
    let expected = 2.0 / (2.0 * center);
    assert!((slope - expected).abs() <= 1e-2 * expected, "slope {slope} vs {expected}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn free_sojourn_increases_with_radius(center in prop_oneof![1.5f64..3.0, -3.0f64..-1.5], width in 0.05f64..0.12, position in -4.0f64..4.0) {
        let radii = default_radii(16.0, 6);
        let values = free_sojourn(&single(center, width, position), &radii);
        for w in values.windows(2) {
            prop_assert!(w[1] > w[0], "{values:?}");
        }
        prop_assert!(values[0] > 0.0);
    }
}

#[test]
fn radii_are_geometric_and_end_at_r_max() {
    let r = default_radii(48.0, 8);
    assert_eq!(r.len(), 8);
    assert!((r[0] - 6.0).abs() < 1e-12 && (r[7] - 48.0).abs() < 1e-12);
    let q = r[1] / r[0];
    for w in r.windows(2) {
        assert!((w[1] / w[0] - q).abs() < 1e-12);
    }
}

#[test]
fn plateau_of_a_constant_curve_is_flat() {
    let radii = default_radii(32.0, 8);
    let p = plateau(&radii, &[1.25; 8]);
    assert_eq!(p.value, 1.25);
    assert!(p.slope.abs() < 1e-15);
}

#[test]
fn oversized_time_step_is_rejected() {
    let sc = Scenario::builtin("two_channel").unwrap();
    let basis = sc.basis().unwrap();
    let packet = sc.packet().unwrap();
    let setup = sc.time_setup(&basis, &packet).unwrap();
    let limit = setup.grid.step.powi(2) / std::f64::consts::PI;
    assert!(SplitStep::new(&setup.coupling, &basis, &setup.grid, limit * 0.99, setup.channels()).is_ok());
    let err = SplitStep::new(&setup.coupling, &basis, &setup.grid, limit * 1.01, setup.channels()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
}

#[test]
fn small_grid_reports_leakage() {
    let mut sc = Scenario::builtin("free").unwrap();
    sc.time.options.extent = 16.0;
    let basis = sc.basis().unwrap();
    let packet = sc.packet().unwrap();
    let setup = sc.time_setup(&basis, &packet).unwrap();
    let mut state = sample_packet(&packet, &basis, &setup.grid, setup.channels(), 0.0, Execution::default()).unwrap();
    let steps = (8.0 / sc.time.options.dt) as usize;
    let err = full_propagate(&mut state, &setup.propagator, steps, &PropagationLimits::default(), |_| true).unwrap_err();
    assert!(matches!(err, Error::DomainTooSmall(_)), "{err}");
}

#[test]
fn propagation_conserves_norm_and_energy() {
    let sc = Scenario::builtin("two_channel").unwrap();
    let basis = sc.basis().unwrap();
    let packet = sc.packet().unwrap();
    let setup = sc.time_setup(&basis, &packet).unwrap();
    let mut state = sample_packet(&packet, &basis, &setup.grid, setup.channels(), -2.0, Execution::default()).unwrap();
    let e0 = setup.propagator.energy(&state).unwrap();
    let steps = (4.0 / sc.time.options.dt) as usize;
    let report = full_propagate(&mut state, &setup.propagator, steps, &PropagationLimits::default(), |_| true).unwrap();
    let e1 = setup.propagator.energy(&state).unwrap();
    assert!(report.norm_drift <= 1e-10, "drift {:e}", report.norm_drift);
    assert!((e1 - e0).abs() <= 1e-4 * e0.abs(), "energy {e0} -> {e1}");
}

#[test]
fn zero_radius_is_rejected_and_tiny_radius_gives_tiny_sojourn() {
    let packet = single(2.0, 0.1, 0.0);
    assert!(sojourn_free(&packet, &[0.0], &FreeOptions::default(), Execution::default()).is_err());
    let v = free_sojourn(&packet, &[1e-3])[0];
    assert!(v > 0.0 && v < 1e-2, "{v}");
}
