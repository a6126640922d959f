use afdr_core::safety::{matrix_inf_norm, safety_filter_clip, safety_filter_solve, SafeSet};
use afdr_oracles::safety_brute_force;
use proptest::prelude::*;

/// Entries drawn partly from a small lattice so that zero windows, repeated
/// and negative extrema all show up.
fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::sample::select(vec![-2.0, -1.0, 0.0, 1.0, 2.0]),
        -3.0f64..3.0,
    ]
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn solve_is_optimal_and_agrees_with_clip(
        r_circ in prop::collection::vec(entry(), 1..4),
        window in prop::collection::vec(entry(), 1..4),
        beta in prop_oneof![Just(0.0), 0.0f64..3.0],
    ) {
        let exact = safety_filter_solve(&r_circ, &window, beta).unwrap();
        let clipped = safety_filter_clip(&r_circ, &window, beta).unwrap();
        prop_assert_eq!(&exact.r, &clipped.r);
        prop_assert_eq!(&exact.saturated, &clipped.saturated);

        // Θ* lies in the safe set and reproduces r.
        prop_assert!(matrix_inf_norm(&exact.theta) <= beta * (1.0 + 1e-12));
        for (i, r) in exact.r.iter().enumerate() {
            let realized: f64 = (0..window.len()).map(|j| exact.theta[(i, j)] * window[j]).sum();
            prop_assert!((realized - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }

        // Cost formula.
        let cost = r_circ.iter().zip(&exact.r).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let predicted = (inf(&r_circ) - beta * inf(&window)).max(0.0);
        prop_assert!((cost - predicted).abs() <= 1e-12 * (1.0 + predicted));

        // Brute force over the ℓ1 ball never beats the closed form, and gets
        // within its grid resolution of it.
        let steps = 24;
        let brute = safety_brute_force(&r_circ, &window, beta, steps);
        let l1: f64 = window.iter().map(|v| v.abs()).sum();
        prop_assert!(cost <= brute + 1e-12);
        prop_assert!(brute <= cost + beta * l1 / steps as f64 + 1e-12);

        let set = SafeSet::new(beta, r_circ.len(), 1, window.len()).unwrap();
        prop_assert!(set.contains(&exact.theta));
    }

    #[test]
    fn clip_is_idempotent_and_monotone_in_beta(
        r_circ in prop::collection::vec(entry(), 1..5),
        window in prop::collection::vec(entry(), 1..9),
        b1 in 0.0f64..4.0,
        b2 in 0.0f64..4.0,
    ) {
        let once = safety_filter_clip(&r_circ, &window, b1).unwrap();
        let twice = safety_filter_clip(&once.r, &window, b1).unwrap();
        prop_assert_eq!(&once.r, &twice.r);

        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let dev = |beta: f64| {
            let c = safety_filter_clip(&r_circ, &window, beta).unwrap();
            r_circ.iter().zip(&c.r).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
        };
        prop_assert!(dev(lo) >= dev(hi));
    }
}
