use afdr_core::benchmark;
use afdr_core::lti::{
    feedback_unity, induced_linf_norm, linf_norm_bound, parallel, series, truncated_l1_norm, StateSpace,
    TransferFunction,
};
use afdr_oracles::{tf_impulse, tf_l1_truncated, TfFilter};
use nalgebra::DMatrix;
use proptest::prelude::*;

const TS: f64 = 0.01;

/// Stable polynomial `Π (z - p_i)` from poles in (-0.9, 0.9).
fn poly(poles: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &p in poles {
        let mut next = vec![0.0; c.len() + 1];
        for (i, v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= p * v;
        }
        c = next;
    }
    c
}

fn stable_tf() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..5).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0f64..2.0, 1..=n + 1),
            prop::collection::vec(-0.9f64..0.9, n),
        )
            .prop_map(|(num, poles)| (num, poly(&poles)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realization_matches_long_division((num, den) in stable_tf()) {
        let g = TransferFunction::new(&num, &den, TS).unwrap().to_state_space();
        let h = g.impulse_response(40);
        let h_ref = tf_impulse(&num, &den, 40);
        for (a, b) in h.iter().zip(&h_ref) {
            prop_assert!((a[(0, 0)] - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn simulation_matches_difference_equation(
        (num, den) in stable_tf(),
        u in prop::collection::vec(-1.0f64..1.0, 100),
    ) {
        let g = TransferFunction::new(&num, &den, TS).unwrap().to_state_space();
        let y = g.simulate_siso(&u).unwrap();
        let y_ref = TfFilter::filter(&num, &den, &u);
        for (a, b) in y.iter().zip(&y_ref) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn series_and_parallel_compose(
        (n1, d1) in stable_tf(),
        (n2, d2) in stable_tf(),
        u in prop::collection::vec(-1.0f64..1.0, 80),
    ) {
        let g1 = TransferFunction::new(&n1, &d1, TS).unwrap().to_state_space();
        let g2 = TransferFunction::new(&n2, &d2, TS).unwrap().to_state_space();
        let y1 = g1.simulate_siso(&u).unwrap();
        let chained = g2.simulate_siso(&y1).unwrap();
        let ser = series(&g1, &g2).unwrap().simulate_siso(&u).unwrap();
        let y2 = g2.simulate_siso(&u).unwrap();
        let par = parallel(&g1, &g2).unwrap().simulate_siso(&u).unwrap();
        for k in 0..u.len() {
            prop_assert!((ser[k] - chained[k]).abs() <= 1e-12 * (1.0 + chained[k].abs()) * 1e3);
            prop_assert!((par[k] - y1[k] - y2[k]).abs() <= 1e-12 * (1.0 + y1[k].abs() + y2[k].abs()) * 1e3);
        }
    }

    #[test]
    fn certified_bound_dominates_truncations((num, den) in stable_tf()) {
        let g = TransferFunction::new(&num, &den, TS).unwrap().to_state_space();
        let nb = linf_norm_bound(&g, 1e-6).unwrap();
        prop_assert!(nb.bound >= nb.partial);
        for horizon in [0usize, 5, 50, 500, 2000] {
            let trunc = truncated_l1_norm(&g, horizon);
            prop_assert!(trunc <= nb.bound * (1.0 + 1e-12));
            let oracle = tf_l1_truncated(&num, &den, horizon + 1);
            prop_assert!((trunc - oracle).abs() <= 1e-9 * (1.0 + oracle));
        }
        // The certified value is within rel_tol of a long truncation.
        let long = tf_l1_truncated(&num, &den, 20_000);
        prop_assert!(nb.bound <= long * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn fir_norm_is_exact(taps in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let mut den = vec![0.0; taps.len()];
        den[0] = 1.0;
        let g = TransferFunction::new(&taps, &den, TS).unwrap().to_state_space();
        let exact: f64 = taps.iter().map(|v| v.abs()).sum();
        let n = induced_linf_norm(&g, 1e-9).unwrap();
        prop_assert!((n - exact).abs() <= 1e-12 * (1.0 + exact));
    }

    #[test]
    fn static_norm_is_max_row_sum(entries in prop::collection::vec(-5.0f64..5.0, 6)) {
        let m = DMatrix::from_row_slice(2, 3, &entries);
        let g = StateSpace::gain(m.clone(), TS).unwrap();
        let exact = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        prop_assert_eq!(induced_linf_norm(&g, 1e-6).unwrap(), exact);
    }
}

#[test]
fn sensitivities_sum_to_identity() {
    let l = series(&benchmark::controller(), &benchmark::plant()).unwrap();
    let (s, t) = feedback_unity(&l).unwrap();
    let u: Vec<f64> = (0..500).map(|k| ((k * 7919) % 97) as f64 / 48.5 - 1.0).collect();
    let ys = s.simulate_siso(&u).unwrap();
    let yt = t.simulate_siso(&u).unwrap();
    for k in 0..u.len() {
        assert!((ys[k] + yt[k] - u[k]).abs() < 1e-9, "k={k}");
    }
}

#[test]
fn reference_uncertainty_norm() {
    let delta = afdr_core::uncertainty::reference_delta();
    let bound = induced_linf_norm(&delta, 1e-6).unwrap();
    let trunc = tf_l1_truncated(&benchmark::MODEL_ERROR_NUM, &benchmark::MODEL_ERROR_DEN, 10_000);
    assert!(bound <= 3e-4);
    assert!(bound >= trunc && bound <= trunc * (1.0 + 1e-6));
}

#[test]
fn steady_state_gain_at_three_rad_per_second() {
    // |S(e^{jωTs})| at 3 rad/s against the amplitude of a simulated sinusoid.
    let l = series(&benchmark::controller(), &benchmark::plant()).unwrap();
    let (s, _) = feedback_unity(&l).unwrap();
    let omega = 3.0 * TS;
    let fr = s.frequency_response(3.0).unwrap()[(0, 0)];
    let gain = (fr.re * fr.re + fr.im * fr.im).sqrt();
    let u: Vec<f64> = (0..20_000).map(|k| (omega * k as f64).sin()).collect();
    let y = s.simulate_siso(&u).unwrap();
    let amp = y[15_000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((amp - gain).abs() < 0.02 * gain, "amp {amp} gain {gain}");
}
