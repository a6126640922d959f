use afdr_core::benchmark;
use afdr_core::lft::{beta_star, build_afdr_lft, check_scaled_small_gain, BlockNorms};
use afdr_core::lti::{StateSpace, TransferFunction};
use afdr_core::uncertainty::{random_delta, reference_delta, UncertaintySpec};
use afdr_oracles::{beta_star_search, direct_loop_output, state_space_to_tf, Tf};
use proptest::prelude::*;

const STEPS: usize = 2000;

fn disturbance() -> Vec<f64> {
    (0..STEPS)
        .map(|k| {
            let t = k as f64 * benchmark::SAMPLE_TIME;
            1.4 * (3.0 * t).sin() + 0.9 * (5.0 * t + 0.4).sin() + 0.05 * ((k * 37 % 11) as f64 - 5.0)
        })
        .collect()
}

fn tf_of(g: &StateSpace) -> Tf {
    state_space_to_tf(g.a(), g.b(), g.c(), g.d())
}

fn check_equivalence(delta: &StateSpace) {
    let p = build_afdr_lft(&benchmark::plant(), &benchmark::controller(), benchmark::DELTA).unwrap();
    let closed = p.close_uncertainty(delta).unwrap();
    let d = disturbance();
    let y_lft = closed.simulate_siso(&d).unwrap();
    let g = Tf::new(&benchmark::PLANT_NUM, &benchmark::PLANT_DEN);
    let k = Tf::new(&benchmark::CONTROLLER_NUM, &benchmark::CONTROLLER_DEN);
    let dt = tf_of(delta);
    let y_ref = direct_loop_output(&g, Some(&dt), &k, &d);
    for i in 0..STEPS {
        assert!(
            (y_lft[i] - y_ref[i]).abs() <= 1e-8,
            "sample {i}: lft {} direct {}",
            y_lft[i],
            y_ref[i]
        );
    }
}

#[test]
fn lft_matches_direct_loop_without_uncertainty() {
    check_equivalence(&StateSpace::zero(1, 1, benchmark::SAMPLE_TIME).unwrap());
}

#[test]
fn lft_matches_direct_loop_with_reference_uncertainty() {
    check_equivalence(&reference_delta());
}

#[test]
fn lft_matches_direct_loop_with_random_uncertainty() {
    for seed in 0..3 {
        let spec = UncertaintySpec::new(benchmark::DELTA, 2, seed, benchmark::SAMPLE_TIME).unwrap();
        check_equivalence(&random_delta(&spec).unwrap());
    }
}

#[test]
fn direct_oracle_agrees_with_transfer_function_realization() {
    let dt = tf_of(&reference_delta());
    let tf = TransferFunction::new(&dt.num, &dt.den, benchmark::SAMPLE_TIME).unwrap();
    let back = tf.to_state_space().impulse_response(30);
    let orig = reference_delta().impulse_response(30);
    for (a, b) in back.iter().zip(&orig) {
        assert!((a[(0, 0)] - b[(0, 0)]).abs() < 1e-15);
    }
}

#[test]
fn certificate_is_valid_below_beta_star() {
    let p = build_afdr_lft(&benchmark::plant(), &benchmark::controller(), benchmark::DELTA).unwrap();
    let cert = beta_star(&p, 1e-6).unwrap();
    assert!(cert.feasible);
    for frac in [0.1, 0.5, 0.9, 0.999] {
        let beta = frac * cert.beta_star;
        let s1 = cert.scaling_for(beta).unwrap();
        assert!(check_scaled_small_gain(&p, s1, beta, 1e-6).unwrap(), "β = {beta}");
    }
    assert!(cert.norms.scaling_for(1.001 * cert.beta_star).is_none());
}

#[test]
fn beta_star_decreases_with_uncertainty() {
    let p = build_afdr_lft(&benchmark::plant(), &benchmark::controller(), benchmark::DELTA).unwrap();
    let mut last = f64::INFINITY;
    for delta in [1e-5, 1e-4, 2e-4, 3e-4, 5e-4, 1e-3] {
        let b = beta_star(&p.with_delta(delta).unwrap(), 1e-6).unwrap().beta_star;
        assert!(b <= last, "δ = {delta}: {b} > {last}");
        last = b;
    }
}

#[test]
fn zero_uncertainty_only_filter_constraint() {
    let p = build_afdr_lft(&benchmark::plant(), &benchmark::controller(), 0.0).unwrap();
    let cert = beta_star(&p, 1e-6).unwrap();
    assert_eq!(cert.norms.h11, 0.0);
    assert_eq!(cert.norms.h21, 0.0);
    assert!(cert.feasible);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closed_form_matches_grid_search(
        h11 in 0.0f64..0.95,
        h12 in 0.01f64..10.0,
        h21 in 0.01f64..10.0,
        h22 in 0.01f64..10.0,
    ) {
        let norms = BlockNorms { h11, h12, h21, h22 };
        let closed = norms.beta_star();
        let grid = beta_star_search(h11, h12, h21, h22);
        prop_assert!(closed.feasible);
        prop_assert!((closed.beta_star - grid).abs() <= 1e-6 * closed.beta_star, "{} vs {}", closed.beta_star, grid);
        let beta = 0.99 * closed.beta_star;
        let s1 = closed.scaling_for(beta).unwrap();
        prop_assert!(norms.satisfies_small_gain(s1, beta).unwrap());
    }

    #[test]
    fn infeasible_when_h11_at_least_one(h11 in 1.0f64..5.0, h in 0.01f64..5.0) {
        let cert = BlockNorms { h11, h12: h, h21: h, h22: h }.beta_star();
        prop_assert!(!cert.feasible);
    }
}
