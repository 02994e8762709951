use irls_bp_core::objective::{
    best_s_term_error, quadratic_majorizer, smoothed_abs, smoothed_gradient, smoothed_objective, smoothing_update,
    weights,
};
use proptest::prelude::*;

/// Piecewise derivative of the Huber-type smoothing, written out per case.
fn gradient_oracle(x: &[f64], eps: f64) -> Vec<f64> {
    x.iter()
        .map(|&t| {
            if t > eps {
                1.0
            } else if t < -eps {
                -1.0
            } else {
                t / eps
            }
        })
        .collect()
}

fn objective_oracle(x: &[f64], eps: f64) -> f64 {
    x.iter()
        .map(|&t| {
            if t.abs() > eps {
                t.abs()
            } else {
                (t * t / eps + eps) / 2.0
            }
        })
        .sum()
}

fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![4 => -10.0f64..10.0, 1 => -1e-3f64..1e-3, 1 => Just(0.0)],
        len,
    )
}

fn eps() -> impl Strategy<Value = f64> {
    prop_oneof![1e-8f64..1e-4, 1e-4f64..1.0, 1.0f64..20.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn weighted_iterate_is_gradient(x in vector(1..40), e in eps()) {
        let w = weights(&x, e);
        let g = gradient_oracle(&x, e);
        for ((wi, xi), gi) in w.iter().zip(&x).zip(&g) {
            prop_assert!((wi * xi - gi).abs() <= 1e-14, "{} vs {}", wi * xi, gi);
        }
        let lib = smoothed_gradient(&x, e);
        prop_assert_eq!(lib, g);
    }

    #[test]
    fn majorizer_touches_at_x(x in vector(1..40), e in eps()) {
        let j = smoothed_objective(&x, e);
        let q = quadratic_majorizer(&x, &x, e);
        prop_assert!((q - j).abs() <= 1e-12 * j.max(1e-300), "{q} vs {j}");
        prop_assert!((j - objective_oracle(&x, e)).abs() <= 1e-12 * j);
    }

    #[test]
    fn majorizer_bounds_objective(
        (x, z) in (1usize..40).prop_flat_map(|n| (vector(n..n + 1), vector(n..n + 1))),
        e in eps(),
    ) {
        let q = quadratic_majorizer(&z, &x, e);
        let jz = smoothed_objective(&z, e);
        prop_assert!(q - jz >= -1e-12 * jz.max(1.0), "Q = {q}, J(z) = {jz}");
    }

    #[test]
    fn coordinate_sandwich(t in prop_oneof![-100.0f64..100.0, -1e-6f64..1e-6], e in eps()) {
        let j = smoothed_abs(t, e);
        prop_assert!(t.abs() <= j);
        prop_assert!(j <= t.abs() + e);
    }

    #[test]
    fn gradient_matches_central_differences(x in vector(1..12), e in 0.01f64..2.0) {
        let h = 1e-6;
        let g = smoothed_gradient(&x, e);
        for i in 0..x.len() {
            // Stay away from the kink |xᵢ| = ε.
            if (x[i].abs() - e).abs() < 1e-3 {
                continue;
            }
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (smoothed_objective(&xp, e) - smoothed_objective(&xm, e)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6, "coordinate {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn best_s_term_matches_sorting(x in prop::collection::vec(-5.0f64..5.0, 10), s in 0usize..=10) {
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let oracle: f64 = mags[s..].iter().sum();
        prop_assert!((best_s_term_error(&x, s) - oracle).abs() <= 1e-12);
    }

    #[test]
    fn smoothing_never_increases(prev in prop_oneof![Just(f64::INFINITY), 0.0f64..5.0], x in vector(3..20), s in 1usize..3) {
        let next = smoothing_update(prev, &x, s);
        prop_assert!(next <= prev);
        prop_assert!(next >= 0.0);
    }
}

#[test]
fn objective_examples() {
    assert_eq!(smoothed_objective(&[0.0; 3], 1.0), 1.5);
    assert_eq!(smoothed_objective(&[2.0, 0.5], 1.0), 2.625);
    assert_eq!(smoothed_objective(&[5.0], 2.0), 5.0);
}

#[test]
fn majorizer_examples() {
    assert_eq!(quadratic_majorizer(&[1.0, -2.0], &[1.0, -2.0], 0.5), 3.0);
    assert_eq!(quadratic_majorizer(&[2.0], &[1.0], 0.5), 2.5);
    assert_eq!(smoothed_objective(&[2.0], 0.5), 2.0);
}

#[test]
fn weight_examples() {
    assert_eq!(weights(&[0.0; 4], 0.5), vec![2.0; 4]);
    assert_eq!(weights(&[3.0, 0.1], 0.5), vec![1.0 / 3.0, 2.0]);
}

#[test]
fn smoothing_examples() {
    assert_eq!(smoothing_update(f64::INFINITY, &[3.0, 1.0, -2.0], 1), 1.0);
    assert_eq!(smoothing_update(0.2, &[3.0, 1.0, -2.0], 1), 0.2);
    assert_eq!(smoothing_update(0.2, &[4.0, 0.0, 0.0], 1), 0.0);
}

#[test]
fn best_s_term_examples() {
    assert_eq!(best_s_term_error(&[3.0, 1.0, -2.0], 1), 3.0);
    assert_eq!(best_s_term_error(&[0.0, 4.0, 0.0, -1.0], 2), 0.0);
    assert_eq!(best_s_term_error(&[0.0, 4.0, 0.0, -1.0], 3), 0.0);
}
