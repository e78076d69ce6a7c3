use ebb84_core::channel::{detection_probability, expected_block_counts_slotted};
use ebb84_core::finite_key::{chernoff_delta, phase_error, Side};
use ebb84_core::uncertainty::{worst_case_over, GridDimension};
use ebb84_core::{
    binary_entropy, expected_block_counts, key_length, secure_key_length, sifting_equivalence, ChannelConditions,
    IntensityUncertaintyModel, ProtocolParams, SecurityParams,
};
use proptest::prelude::*;

prop_compose! {
    fn arb_params()(
        pax in 0.05f64..0.95,
        pbx in 0.05f64..0.95,
        mu1 in 0.2f64..1.0,
        ratio in 0.05f64..0.6,
        p1 in 0.2f64..0.8,
        split in 0.1f64..0.9,
    ) -> ProtocolParams {
        let mu2 = mu1 * ratio;
        let rest = 1.0 - p1;
        ProtocolParams::new(pax, pbx, [mu1, mu2, 1e-9], [p1, rest * split, 1.0 - p1 - rest * split]).unwrap()
    }
}

prop_compose! {
    fn arb_channel()(
        eta in 0.0f64..60.0,
        log_pec in -8.0f64..-3.0,
        qber in 0.0f64..0.05,
        tau in 1.0f64..3600.0,
    ) -> ChannelConditions {
        ChannelConditions::new(eta, 10f64.powf(log_pec), qber, tau).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn detection_increases_with_intensity_and_transmittance(
        k in 0.0f64..2.0, dk in 1e-3f64..1.0,
        p_d in 1e-6f64..0.5, dp in 1e-3f64..0.5,
        p_ec in 0.0f64..0.49, p_ap in 0.0f64..0.1,
    ) {
        let base = detection_probability(k, p_d, p_ec, p_ap).unwrap();
        prop_assert!(detection_probability(k + dk, p_d, p_ec, p_ap).unwrap() > base);
        prop_assert!(detection_probability(k + dk, (p_d + dp).min(1.0), p_ec, p_ap).unwrap()
            > detection_probability(k + dk, p_d, p_ec, p_ap).unwrap());
    }

    #[test]
    fn errors_never_exceed_detections(params in arb_params(), channel in arb_channel()) {
        let c = expected_block_counts(&params, &channel).unwrap();
        for k in 0..3 {
            prop_assert!(c.m_x[k] <= c.n_x[k]);
            prop_assert!(c.m_z[k] <= c.n_z[k]);
        }
    }

    #[test]
    fn sifted_fraction_identity(params in arb_params(), channel in arb_channel()) {
        let c = expected_block_counts(&params, &channel).unwrap();
        let rates = ebb84_core::PulseRates::for_intensities(&params.mu, &channel).unwrap();
        let detections: f64 = (0..3).map(|k| params.p_mu[k] * rates.detection[k]).sum::<f64>() * channel.pulses();
        let sifted = c.n_x_total() + c.n_z_total();
        let expected = params.pax * params.pbx + (1.0 - params.pax) * (1.0 - params.pbx);
        prop_assert!((sifted / detections - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn slots_with_constant_conditions_match_one_window(params in arb_params(), channel in arb_channel(), n in 2usize..12) {
        let slot = channel.with_integration_time(channel.integration_time_s / n as f64);
        let a = expected_block_counts_slotted(&params, &vec![slot; n]).unwrap();
        let b = expected_block_counts(&params, &channel).unwrap();
        for k in 0..3 {
            prop_assert!((a.n_x[k] - b.n_x[k]).abs() <= 1e-12 * b.n_x[k].abs().max(1e-300));
            prop_assert!((a.m_z[k] - b.m_z[k]).abs() <= 1e-12 * b.m_z[k].abs().max(1e-300));
        }
    }

    #[test]
    fn concentration_sides_ordered(y in 0.0f64..1e12, beta in 1e-3f64..100.0) {
        let plus = chernoff_delta(y, beta, Side::Plus).unwrap();
        let minus = chernoff_delta(y, beta, Side::Minus).unwrap();
        prop_assert!(plus > minus && minus > 0.0);
    }

    #[test]
    fn phase_error_bounded(s_z1 in 1.0f64..1e10, s_x1 in 1.0f64..1e10, frac in 0.0f64..1.0) {
        let sec = SecurityParams::default();
        let phi = phase_error(s_z1, frac * s_z1, s_x1, &sec).unwrap();
        prop_assert!((0.0..=0.5).contains(&phi));
        let h = binary_entropy(phi).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn chain_invariants(params in arb_params(), channel in arb_channel()) {
        let r = key_length(&params, &channel, &SecurityParams::default()).unwrap();
        prop_assert!(r.s_x0 + r.s_x1 <= r.n_x);
        prop_assert!((0.0..=0.5).contains(&r.phi_x));
        if r.ell > 0 {
            prop_assert!(r.no_key.is_none());
            prop_assert!(r.objective >= r.ell as f64 && r.objective < r.ell as f64 + 1.0);
        }
    }

    #[test]
    fn doubling_window_at_least_doubles_key(params in arb_params(), channel in arb_channel()) {
        let sec = SecurityParams::default();
        let one = key_length(&params, &channel, &sec).unwrap().ell;
        let two = key_length(&params, &channel.with_integration_time(2.0 * channel.integration_time_s), &sec).unwrap().ell;
        if one > 0 {
            prop_assert!(two >= 2 * one, "{} -> {}", one, two);
        }
    }

    #[test]
    fn sifting_equivalence_dominates(pax in 0.001f64..0.999, pbx in 0.001f64..0.999) {
        let s = sifting_equivalence(pax, pbx).unwrap();
        prop_assert!(s.f_prime >= s.f * (1.0 - 1e-12));
        let ratio = s.p_x * s.p_x / ((1.0 - s.p_x) * (1.0 - s.p_x));
        prop_assert!((ratio - s.k).abs() <= 1e-9 * s.k);
    }
}

#[test]
fn key_length_monotone_on_loss_and_background_grid() {
    let sec = SecurityParams::default();
    let settings = [
        ProtocolParams::new(0.8, 0.8, [0.5, 0.1, 1e-9], [0.7, 0.2, 0.1]).unwrap(),
        ProtocolParams::new(0.7, 0.5, [0.6, 0.15, 1e-9], [0.8, 0.15, 0.05]).unwrap(),
    ];
    let etas: Vec<f64> = (0..=20).map(|i| 10.0 + 2.0 * i as f64).collect();
    let pecs = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3];
    for params in &settings {
        for &qber in &[0.005, 0.01] {
            for &tau in &[60.0, 1800.0] {
                let ell = |eta: f64, pec: f64| {
                    key_length(params, &ChannelConditions::new(eta, pec, qber, tau).unwrap(), &sec).unwrap().ell
                };
                for &pec in &pecs {
                    let row: Vec<u64> = etas.iter().map(|&e| ell(e, pec)).collect();
                    assert!(row.windows(2).all(|w| w[1] <= w[0]), "loss {pec} {row:?}");
                }
                for &eta in &etas {
                    let col: Vec<u64> = pecs.iter().map(|&p| ell(eta, p)).collect();
                    assert!(col.windows(2).all(|w| w[1] <= w[0]), "background {eta} {col:?}");
                }
            }
        }
    }
}

#[test]
fn zero_window_yields_no_key() {
    let params = ProtocolParams::new(0.8, 0.8, [0.5, 0.1, 1e-9], [0.7, 0.2, 0.1]).unwrap();
    let channel = ChannelConditions::new(20.0, 1e-6, 0.01, 0.0).unwrap();
    let counts = expected_block_counts(&params, &channel).unwrap();
    let r = secure_key_length(&counts, &params, &SecurityParams::default()).unwrap();
    assert_eq!(r.ell, 0);
}

#[test]
fn sifting_grid() {
    for i in 1..=100 {
        for j in 1..=100 {
            let (pax, pbx) = (i as f64 / 101.0, j as f64 / 101.0);
            let s = sifting_equivalence(pax, pbx).unwrap();
            let ratio = s.p_x * s.p_x / ((1.0 - s.p_x) * (1.0 - s.p_x));
            assert!((ratio - s.k).abs() <= 1e-12 * s.k);
            if i == j {
                assert!((s.f_prime - s.f).abs() <= 1e-12);
            } else {
                assert!(s.f_prime > s.f);
            }
        }
    }
}

#[test]
fn worst_case_non_increasing_in_deviation() {
    let sec = SecurityParams::default();
    let nominal = ProtocolParams::new(0.75, 0.5, [0.5, 0.1, 1e-9], [0.75, 0.17, 0.08]).unwrap();
    let channel = ChannelConditions::new(36.0, 1e-6, 0.01, 1800.0).unwrap();
    let dims = [
        GridDimension::HSignal,
        GridDimension::VDecoy,
        GridDimension::DSignal,
        GridDimension::EstimatorSignal,
        GridDimension::EstimatorDecoy,
    ];
    let mut last = u64::MAX;
    for f in [0.0, 0.02, 0.05, 0.1] {
        let model = IntensityUncertaintyModel::new(f, nominal).unwrap();
        let w = worst_case_over(&model, &dims, &channel, &sec).unwrap();
        assert!(w.min_ell <= w.nominal_ell);
        if f == 0.0 {
            assert_eq!(w.min_ell, w.nominal_ell);
        }
        assert!(w.min_ell <= last);
        last = w.min_ell;
    }
}
