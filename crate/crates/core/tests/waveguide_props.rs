use std::f64::consts::PI;

use proptest::prelude::*;
use wgdelay::waveguide::*;
use wgdelay::Error;

#[test]
fn single_open_channel_below_second_threshold() {
    let basis = TransverseBasis::new(PI, 4).unwrap();
    let open = open_channels(2.0, &basis, basis.default_threshold_window()).unwrap();
    assert_eq!(open.count(), 1);
    assert_eq!(open.fiber_dimension(), 2);
    assert!((open.momenta[0] - 1.0).abs() < 1e-15);
}

#[test]
fn energy_on_a_threshold_is_rejected() {
    let basis = TransverseBasis::new(PI, 4).unwrap();
    let err = open_channels(4.0, &basis, basis.default_threshold_window()).unwrap_err();
    assert!(matches!(err, Error::ThresholdProximity { channel: 2, .. }), "{err}");
}

fn profile() -> impl Strategy<Value = LongitudinalProfile> {
    prop_oneof![
        (-5.0f64..5.0, 0.3f64..2.0, -1.0f64..1.0)
            .prop_map(|(amplitude, width, center)| LongitudinalProfile::Gaussian { amplitude, width, center }),
        (-5.0f64..5.0, 0.3f64..2.0, -1.0f64..1.0)
            .prop_map(|(amplitude, half_width, center)| LongitudinalProfile::Box { amplitude, half_width, center }),
        (-5.0f64..5.0, 0.3f64..1.0, -1.0f64..1.0)
            .prop_map(|(amplitude, width, center)| LongitudinalProfile::Sech2 { amplitude, width, center }),
    ]
}

fn transverse() -> impl Strategy<Value = TransverseProfile> {
    prop_oneof![
        (-2.0f64..2.0).prop_map(|value| TransverseProfile::Constant { value }),
        (-2.0f64..2.0, 0.1f64..0.9, 0.05f64..0.5).prop_map(|(amplitude, c, width)| TransverseProfile::GaussianBump {
            amplitude,
            center: c,
            width
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coupling_is_exactly_symmetric_and_decays(
        l in transverse(), v in profile(), m in profile(), width in 0.5f64..3.0, modes in 1usize..6,
    ) {
        let spec = PotentialSpec::SumOfSeparables {
            terms: vec![
                SeparableTerm { transverse: l.clone(), longitudinal: v },
                SeparableTerm { transverse: l, longitudinal: m },
            ],
        };
        let basis = TransverseBasis::new(width, modes).unwrap();
        let grid = XGrid::symmetric(30.0, 0.1).unwrap();
        let c = compute_coupling(&spec, &basis, &grid, 64).unwrap();
        prop_assert_eq!(c.asymmetry(), 0.0);
        // every catalog profile is negligible 30 units out
        let edge = c.matrix_at(0).amax().max(c.matrix_at(grid.len - 1).amax());
        prop_assert!(edge <= 1e-12 * c.peak().max(1e-300), "tail {edge:e} vs peak {}", c.peak());
    }

    #[test]
    fn fiber_dimension_steps_by_two_at_thresholds(width in 0.5f64..3.0, modes in 2usize..6, frac in 0.01f64..0.99) {
        let basis = TransverseBasis::new(width, modes).unwrap();
        let window = basis.default_threshold_window();
        let dims: Vec<usize> = (0..200)
            .map(|i| basis.threshold(0) + 2.0 * window + i as f64 * (basis.threshold(modes - 1) * 1.2) / 200.0)
            .filter_map(|e| open_channels(e, &basis, window).ok())
            .map(|o| o.fiber_dimension())
            .collect();
        prop_assert!(dims.windows(2).all(|w| w[1] >= w[0]));
        for a in 1..modes {
            let t = basis.threshold(a);
            let gap = (t - basis.threshold(a - 1)).min(basis.thresholds().get(a + 1).map_or(f64::INFINITY, |u| u - t));
            let d = window + frac * (gap - 2.0 * window) / 2.0;
            let below = open_channels(t - d, &basis, window).unwrap().fiber_dimension();
            let above = open_channels(t + d, &basis, window).unwrap().fiber_dimension();
            prop_assert_eq!(above, below + 2);
        }
    }
}
